"""Command-line interface.

Exit codes: 0 success, 1 usage or configuration error, 2 data error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .did import fit_heterogeneity, fit_main_spec, placebo_pretrend, two_by_two
from .dgp import generate_panel
from .estimator import RegressionSpec, fit
from .io import (
    ConfigError,
    DataError,
    default_config_text,
    format_config,
    load_config,
    read_panel_csv,
    read_schools_csv,
    write_panel_csv,
)
from .model import DistributionSpec, check_feasibility, informed_allocation, uniform_allocation
from .montecarlo import run_mc, run_model_mc
from .report import TableLayout, render_table

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}. Run '{self.prog} --help' for usage.")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="random seed (overrides the config)")
    p.add_argument("--config", default=None, help="config file, or 'default' for the shipped defaults")
    p.add_argument("--out", default=None, help="output path (default: stdout)")


def _fe_flags(p, default):
    p.add_argument("--fe", dest="fe", action="store_true", default=default, help="school fixed effects")
    p.add_argument("--no-fe", dest="fe", action="store_false", help="no fixed effects")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="decentsim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"decentsim {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("simulate", help="generate a synthetic panel CSV")
    _common(p)
    p.add_argument("--print-config", action="store_true", help="print the effective configuration and exit")

    p = sub.add_parser("estimate", help="fit a DiD regression and print a table")
    _common(p)
    p.add_argument("panel")
    p.add_argument("--outcome", default="score_math", help="comma-separated outcome column(s)")
    _fe_flags(p, default=False)
    p.add_argument("--cluster", default="school_id")
    p.add_argument("--covariates", default="", help="comma-separated extra covariates")
    p.add_argument("--pupil-covariates", action="store_true", help="add the pupil covariate set")
    p.add_argument("--grade2-only", action="store_true")
    p.add_argument("--moderator", default=None, help="binary column interacted with the effect")
    p.add_argument("--r2", choices=("within", "overall"), default="within")

    p = sub.add_parser("did", help="difference-in-differences summary")
    _common(p)
    p.add_argument("panel")
    p.add_argument("--outcome", default="score_math")
    _fe_flags(p, default=True)
    p.add_argument("--cluster", default="school_id")
    p.add_argument("--no-covariates", action="store_true", help="plain 2x2 difference of cell means")
    p.add_argument("--grade2-only", action="store_true")
    p.add_argument("--moderator", default=None)
    p.add_argument("--placebo", action="store_true", help="placebo pre-trend test (needs >= 3 periods)")

    p = sub.add_parser("mc", help="Monte Carlo bias, RMSE and coverage of the FE estimator")
    _common(p)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--outcome", default=None)
    _fe_flags(p, default=None)

    p = sub.add_parser("allocate", help="informed vs uniform allocation for a list of schools")
    _common(p)
    p.add_argument("schools", help="CSV with columns id,s (optional e,l0)")
    p.add_argument("--budget", type=float, required=True, help="per-school budget")
    p.add_argument("--cap", type=float, default=None, help="largest increment one school may get")

    p = sub.add_parser("gains", help="expected gains over a budget/cap grid")
    _common(p)
    p.add_argument("--distribution", default=None, help="e.g. 'uniform(-1, 1)'")
    p.add_argument("--budgets", default=None, help="comma-separated per-school budgets")
    p.add_argument("--cap-ratios", default=None, help="comma-separated cap / budget ratios")
    p.add_argument("--draws", type=int, default=None)
    p.add_argument("--schools", type=int, default=None)
    return parser


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _floats(text: str, flag: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{flag} expects comma-separated numbers, got {text!r}") from None


def cmd_simulate(args, cfg) -> int:
    if args.print_config:
        sys.stdout.write(format_config(cfg) if args.config else default_config_text())
        return EXIT_OK
    dgp = cfg.dgp if args.seed is None else cfg.dgp.replace(seed=args.seed)
    panel = generate_panel(dgp)
    if args.out is None:
        import tempfile

        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "panel.csv"
            write_panel_csv(panel, path)
            sys.stdout.write(path.read_text(encoding="utf-8"))
    else:
        write_panel_csv(panel, args.out)
    print(f"wrote {len(panel)} rows, {panel.n_schools} schools", file=sys.stderr)
    return EXIT_OK


def cmd_estimate(args, cfg) -> int:
    panel = read_panel_csv(args.panel)
    df = panel.frame
    if args.grade2_only:
        df = df.loc[df["grade_high"] == 0]
    extra = [c for c in args.covariates.split(",") if c.strip()]
    if args.pupil_covariates:
        extra = [*cfg.estimate.covariates, *extra]
    if args.grade2_only:
        extra = [c for c in extra if c != "grade_high"]
    covs = tuple(dict.fromkeys(["post", "public", *extra]))
    interactions = [("post", "public")]
    if args.moderator:
        covs = tuple(dict.fromkeys([*covs, args.moderator]))
        interactions += [("post", args.moderator), ("public", args.moderator),
                         ("post", "public", args.moderator)]
    fits = []
    for outcome in [o.strip() for o in args.outcome.split(",") if o.strip()]:
        spec = RegressionSpec(
            outcome, covs, tuple(interactions),
            fixed_effect="school_id" if args.fe else None, cluster=args.cluster, r2=args.r2,
        )
        fits.append(fit(df, spec))
    text, table_csv = render_table(fits, TableLayout())
    _emit(text, args.out)
    if args.out is not None:
        Path(f"{args.out}.csv").write_text(table_csv, encoding="utf-8")
        summary = [
            {"outcome": f.outcome, "fixed_effect": f.fixed_effect, "n_obs": f.n_obs,
             "n_clusters": f.n_clusters, "r_squared": f.r_squared, "absorbed": list(f.absorbed),
             "coefficients": {n: {"estimate": float(e), "se": float(s), "t": float(t)}
                              for n, e, s, t in zip(f.names, f.params, f.se, f.t_stats)}}
            for f in fits
        ]
        Path(f"{args.out}.json").write_text(_json(summary), encoding="utf-8")
    return EXIT_OK


def cmd_did(args, cfg) -> int:
    panel = read_panel_csv(args.panel)
    if args.placebo:
        res = placebo_pretrend(panel, args.outcome, args.cluster)
        payload = {"placebo_estimate": res.estimate, "se": res.se, "t_stat": res.t_stat,
                   "p_value": res.p_value, "n_obs": res.n_obs}
        text = (f"placebo pre-trend: estimate {res.estimate:.4f}, se {res.se:.4f}, "
                f"t {res.t_stat:.2f}, p {res.p_value:.4f}\n")
    else:
        if args.no_covariates:
            summary = two_by_two(panel, args.outcome, args.cluster)
        elif args.moderator:
            summary = fit_heterogeneity(panel, args.outcome, args.moderator, cluster=args.cluster)
        else:
            summary = fit_main_spec(panel, args.outcome, args.fe, args.grade2_only, args.cluster)
        payload = summary.to_dict()
        lines = [f"{summary.label}: ATT {summary.att_estimate!r} (se {summary.se:.4f}, t {summary.t_stat:.2f})"]
        cm = summary.cell_means
        lines.append(f"cell means  pre: private {cm.loc['pre', 'private']:.4f} public {cm.loc['pre', 'public']:.4f}")
        lines.append(f"           post: private {cm.loc['post', 'private']:.4f} public {cm.loc['post', 'public']:.4f}")
        for name, (e, s, t) in summary.heterogeneity.items():
            lines.append(f"{name}: {e:.4f} (se {s:.4f}, t {t:.2f})")
        text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.out is not None:
        Path(args.out).write_text(_json(payload), encoding="utf-8")
    return EXIT_OK


def cmd_mc(args, cfg) -> int:
    reps = cfg.mc.reps if args.reps is None else args.reps
    jobs = cfg.mc.jobs if args.jobs is None else args.jobs
    if reps < 1:
        raise UsageError(f"--reps must be >= 1, got {reps}. Pass a positive replication count.")
    if jobs == 0:
        raise UsageError("--jobs must be non-zero. Use 1 for serial execution or -1 for all cores.")
    est = cfg.estimate
    fe = est.fe if args.fe is None else args.fe
    outcome = args.outcome or est.outcome
    covs = [c for c in est.covariates if not (est.grade2_only and c == "grade_high")]
    spec = RegressionSpec(outcome, ("post", "public", *covs), (("post", "public"),),
                          fixed_effect="school_id" if fe else None, cluster=est.cluster, r2=est.r2)
    seed = cfg.mc.base_seed if args.seed is None else args.seed
    result = run_mc(cfg.dgp, spec, reps, seed, n_jobs=jobs)
    s = result.summary()
    text = "\n".join(
        [f"replications        {s['n_reps']}",
         f"true effect         {s['true_att']:.4f}",
         f"mean estimate       {s['mean_estimate']:.4f}",
         f"bias                {s['bias']:.4f}  (MC se {s['mc_se']:.4f})",
         f"RMSE                {s['rmse']:.4f}",
         f"sd of estimates     {s['sd_estimates']:.4f}",
         f"mean cluster se     {s['mean_se']:.4f}",
         f"95% CI coverage     {s['ci_coverage_95']:.3f}",
         f"5% rejection rate   {s['rejection_rate_5pct']:.3f}"]
    ) + "\n"
    sys.stdout.write(text)
    if args.out is not None:
        records = result.records()
        records.to_csv(args.out, index=False, float_format=None, lineterminator="\n")
        Path(f"{args.out}.json").write_text(_json(s), encoding="utf-8")
    return EXIT_OK


def cmd_allocate(args, cfg) -> int:
    schools = read_schools_csv(args.schools)
    if not args.budget > 0:
        raise UsageError("--budget must be > 0")
    plan = informed_allocation(schools, args.budget, args.cap)
    ok, violations = check_feasibility(plan, schools)
    uniform = uniform_allocation(len(schools), args.budget)
    s = [sc.s for sc in schools]
    delta = uniform.objective(s) / len(schools)
    rho = plan.objective(s) / len(schools)
    lines = ["id,s,uniform_increment,informed_increment,gain"]
    for sc, inc in zip(schools, plan.increments):
        lines.append(f"{sc.id},{sc.s!r},{args.budget!r},{inc!r},{sc.s * inc!r}")
    _emit("\n".join(lines) + "\n", args.out)
    report = {"delta_centralized": delta, "rho_decentralized": rho, "lambda_gain": rho - delta,
              "n_draws": 1, "standard_error": 0.0, "feasible": ok, "violations": violations}
    if args.out is not None:
        Path(f"{args.out}.json").write_text(_json(report), encoding="utf-8")
    print(f"uniform gain {delta:.6g}, informed gain {rho:.6g}, decentralization gain {rho - delta:.6g}",
          file=sys.stderr)
    return EXIT_OK


def cmd_gains(args, cfg) -> int:
    m = cfg.model
    try:
        dist = DistributionSpec.parse(args.distribution or m.distribution)
    except ValueError as exc:
        raise UsageError(f"--distribution: {exc}") from None
    budgets = _floats(args.budgets, "--budgets") if args.budgets else list(m.budgets)
    ratios = _floats(args.cap_ratios, "--cap-ratios") if args.cap_ratios else list(m.cap_ratios)
    draws = m.n_draws if args.draws is None else args.draws
    n_schools = m.n_schools if args.schools is None else args.schools
    if draws < 1 or n_schools < 1:
        raise UsageError("--draws and --schools must be >= 1")
    if any(r < 1 for r in ratios):
        raise UsageError("--cap-ratios must all be >= 1 (a cap below the budget is infeasible)")
    grid = [(b, b * r) for b in budgets for r in ratios]
    seed = m.seed if args.seed is None else args.seed
    table = run_model_mc(dist, grid, draws, seed, n_schools=n_schools)
    _emit(table.to_csv(index=False, lineterminator="\n"), args.out)
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "did": cmd_did,
    "mc": cmd_mc,
    "allocate": cmd_allocate,
    "gains": cmd_gains,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"data error: {msg}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
