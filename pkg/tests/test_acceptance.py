"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py`` (the lines are printed in the
terminal summary) or directly with ``python tests/test_acceptance.py``.
"""
import time

import numpy as np
import pytest

from decentsim.cli import main
from decentsim.dgp import DGPConfig, generate_panel
from decentsim.did import fit_heterogeneity
from decentsim.estimator import RegressionSpec, fit
from decentsim.model import (
    DistributionSpec,
    School,
    check_feasibility,
    draw_rng,
    expected_gains,
    informed_allocation,
    uniform_allocation,
)
from decentsim.montecarlo import run_mc, run_placebo_mc
from decentsim.report import format_cell
from oracles import brute_force_allocation, cell_means_did, lsdv

RESULTS = []


def record(number, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def _schools(s):
    return [School(id=i, s=float(v)) for i, v in enumerate(s)]


def test_criterion_01_pathwise_dominance():
    start = time.perf_counter()
    dist = DistributionSpec("uniform", (-1.0, 1.0))
    n, draws = 10, 10_000
    uniform = uniform_allocation(n, 1.0)
    worst, strict = np.inf, 0
    for k in range(draws):
        s = dist.sample(draw_rng(0, k), n)
        schools = _schools(s)
        diff = informed_allocation(schools, 1.0).objective(s) - uniform.objective(s)
        worst = min(worst, diff)
        strict += diff > 1e-12
    elapsed = time.perf_counter() - start
    share = strict / draws
    record(1, worst >= -1e-12 and share > 0.99 and elapsed < 5.0,
           f"min gain difference {worst:.3g}, strict share {share:.4f}, {elapsed:.2f}s")


def test_criterion_02_allocation_optimality():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    step, budget, cap = 0.05, 1.0, 3.0
    worst_gap, all_feasible = -np.inf, True
    within = True
    for i in range(200):
        n = 1 + i % 4
        s = np.round(rng.uniform(-1, 1, n), 3)
        schools = _schools(s)
        plan = informed_allocation(schools, budget, cap)
        all_feasible &= check_feasibility(plan, schools)[0]
        _, best = brute_force_allocation(s, budget, cap, step)
        gap = best - plan.objective(s)
        worst_gap = max(worst_gap, gap)
        within &= abs(gap) <= step * np.abs(s).sum() + 1e-9 and gap <= 1e-9
    elapsed = time.perf_counter() - start
    record(2, within and all_feasible and elapsed < 30.0,
           f"largest brute-force excess {worst_gap:.3g}, feasible {all_feasible}, {elapsed:.2f}s")


def test_criterion_03_no_information_null():
    rep = expected_gains(DistributionSpec("point", (0.3,)), 10, 1.0, n_draws=2000, seed=3, keep_draws=True)
    per_draw_zero = bool(np.all(rep.per_draw_lambda == 0.0))
    ok = per_draw_zero and abs(rep.lambda_gain) <= 2 * rep.standard_error
    record(3, ok, f"lambda_gain {rep.lambda_gain}, every draw exactly zero: {per_draw_zero}")


def test_criterion_04_oracle_equalities():
    covs = ("post", "public", "age", "girl", "books", "electricity", "anglophone", "grade_high")
    worst_fe, worst_did = 0.0, 0.0
    for seed in range(50):
        panel = generate_panel(DGPConfig(n_municipalities=8, schools_per_municipality=3,
                                         pupils_per_school=6, seed=1000 + seed))
        df = panel.frame
        res = fit(panel, RegressionSpec("score_math", covs, (("post", "public"),), fixed_effect="school_id"))
        X = np.column_stack([df["post"].to_numpy(float) * df["public"].to_numpy(float) if ":" in name
                             else df[name].to_numpy(float) for name in res.names])
        beta = lsdv(df["score_math"].to_numpy(float), X, df["school_id"].to_numpy())
        worst_fe = max(worst_fe, float(np.max(np.abs(res.params - beta))))
        sat = fit(panel, RegressionSpec("score_math", ("post", "public"), (("post", "public"),)))
        did = cell_means_did(df["score_math"], df["post"], df["public"])
        worst_did = max(worst_did, abs(sat.coef("post:public") - did))
    record(4, worst_fe <= 1e-8 and worst_did <= 1e-10,
           f"max |FE - LSDV| {worst_fe:.2e}, max |OLS - 2x2 means| {worst_did:.2e}")


def test_criterion_05_planted_effect_recovery():
    start = time.perf_counter()
    res = run_mc(DGPConfig(), n_reps=500, base_seed=0)
    elapsed = time.perf_counter() - start
    ok = (abs(res.bias) < 3 * res.mc_se and 0.92 <= res.ci_coverage_95 <= 0.975
          and 0.02 <= res.rejection_rate_5pct <= 0.09 and np.isfinite(res.rmse) and elapsed < 60.0)
    record(5, ok, f"bias {res.bias:.4f} (MC se {res.mc_se:.4f}), RMSE {res.rmse:.4f}, "
                  f"coverage {res.ci_coverage_95:.3f}, size {res.rejection_rate_5pct:.3f}, {elapsed:.1f}s")


def test_criterion_06_selection_bias():
    res = run_mc(DGPConfig(selection_corr=0.8, mu2=1.0), n_reps=500, base_seed=0)
    record(6, abs(res.bias) > 3 * res.mc_se, f"bias {res.bias:.4f} (MC se {res.mc_se:.4f})")


def test_criterion_07_heterogeneity_recovery():
    gap = -4.163
    cfg = DGPConfig(n_municipalities=200, lambda_anglophone_gap=gap, seed=7)
    assert cfg.n_schools >= 800
    est, se, _ = fit_heterogeneity(generate_panel(cfg), moderator="anglophone").heterogeneity[
        "post:public:anglophone"]
    record(7, abs(est - gap) < 3 * se, f"estimate {est:.4f} (se {se:.4f}) vs planted {gap}")


def test_criterion_08_placebo_behavior():
    null = run_placebo_mc(DGPConfig(n_periods=3, pretrend_gap=0.0), 400, base_seed=0)
    alt = run_placebo_mc(DGPConfig(n_periods=3, pretrend_gap=5.0), 400, base_seed=0)
    record(8, 0.02 <= null <= 0.09 and alt > 0.9, f"rejection rate {null:.4f} at gap 0, {alt:.4f} at gap 5")


def test_criterion_09_formatting_fixtures():
    got = [format_cell(10.2, 19.71), format_cell(0.825, 0.94)[0], format_cell(1.705, 2.12)[0]]
    want = [("10.20***", "(19.71)"), "0.825", "1.705*"]
    record(9, got == want, f"rendered {got}")


def test_criterion_10_cli_determinism(tmp_path):
    def run(tag, *args):
        out = tmp_path / tag
        assert main([*args, "--out", str(out)]) == 0
        return out

    outputs = {}
    for k in range(2):
        panel = run(f"panel{k}.csv", "simulate", "--seed", "11")
        outputs.setdefault("panel", []).append(panel)
        table = run(f"table{k}.txt", "estimate", str(panel), "--fe", "--pupil-covariates")
        outputs.setdefault("table", []).append(table)
        outputs.setdefault("table csv", []).append(tmp_path / f"table{k}.txt.csv")
        outputs.setdefault("gains", []).append(run(f"gains{k}.csv", "gains", "--draws", "500"))
    for jobs in ("1", "2", "-1"):
        mc = run(f"mc{jobs}.csv", "mc", "--reps", "6", "--seed", "5", "--jobs", jobs)
        outputs.setdefault("mc", []).append(mc)
        outputs.setdefault("mc json", []).append(tmp_path / f"mc{jobs}.csv.json")
    same = {name: len({p.read_bytes() for p in paths}) == 1 for name, paths in outputs.items()}
    record(10, all(same.values()), f"byte-identical outputs: {same}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
