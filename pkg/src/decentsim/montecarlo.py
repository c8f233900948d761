"""Replication harness for the DiD estimator and for the allocation model."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy.stats import norm

from .dgp import DGPConfig, generate_panel, true_att
from .did import TREATMENT, main_spec
from .estimator import RegressionSpec, fit
from .model import DistributionSpec, GainReport, expected_gains

Z_95 = float(norm.ppf(0.975))


class ReplicationError(RuntimeError):
    def __init__(self, rep: int, seed: int, cause: Exception):
        self.rep, self.seed = rep, seed
        super().__init__(f"replication {rep} (seed {seed}) failed: {cause}")


@dataclass(frozen=True)
class MCResult:
    n_reps: int
    true_att: float
    estimates: np.ndarray = field(repr=False)
    ses: np.ndarray = field(repr=False)
    seeds: np.ndarray = field(repr=False)
    critical_value: float = Z_95

    @property
    def mean_estimate(self) -> float:
        return float(self.estimates.mean())

    @property
    def bias(self) -> float:
        return self.mean_estimate - self.true_att

    @property
    def sd_estimates(self) -> float:
        return float(self.estimates.std(ddof=1)) if self.n_reps > 1 else 0.0

    @property
    def mc_se(self) -> float:
        """Monte Carlo standard error of the mean estimate."""
        return self.sd_estimates / math.sqrt(self.n_reps)

    @property
    def rmse(self) -> float:
        return float(np.sqrt(np.mean((self.estimates - self.true_att) ** 2)))

    @property
    def mean_se(self) -> float:
        return float(self.ses.mean())

    @property
    def covers(self) -> np.ndarray:
        return np.abs(self.estimates - self.true_att) <= self.critical_value * self.ses

    @property
    def ci_coverage_95(self) -> float:
        return float(self.covers.mean())

    @property
    def rejection_rate_5pct(self) -> float:
        return 1.0 - self.ci_coverage_95

    def summary(self) -> dict:
        return {
            "n_reps": self.n_reps,
            "true_att": self.true_att,
            "mean_estimate": self.mean_estimate,
            "bias": self.bias,
            "mc_se": self.mc_se,
            "rmse": self.rmse,
            "sd_estimates": self.sd_estimates,
            "mean_se": self.mean_se,
            "ci_coverage_95": self.ci_coverage_95,
            "rejection_rate_5pct": self.rejection_rate_5pct,
        }

    def records(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "rep": np.arange(self.n_reps),
                "seed": self.seeds,
                "estimate": self.estimates,
                "se": self.ses,
                "covers": self.covers.astype(int),
            }
        )


def replication_seed(base_seed: int, rep: int) -> int:
    return int(np.random.SeedSequence([base_seed, rep]).generate_state(1, np.uint32)[0])


def _one_rep(config: DGPConfig, spec: RegressionSpec, rep: int, seed: int, term: str):
    try:
        panel = generate_panel(config.replace(seed=seed))
        result = fit(panel, spec)
        return result.coef(term), result.stderr(term)
    except Exception as exc:
        raise ReplicationError(rep, seed, exc) from exc


def run_mc(
    config: DGPConfig,
    spec: RegressionSpec | None = None,
    n_reps: int = 500,
    base_seed: int = 0,
    n_jobs: int = 1,
    term: str = TREATMENT,
) -> MCResult:
    """Generate, fit and record ``n_reps`` times.

    Replication ``r`` uses a seed derived from ``(base_seed, r)`` only, so the
    result does not depend on ``n_jobs``. Confidence intervals use normal
    critical values on the cluster-robust standard errors.
    """
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    if spec is None:
        spec = main_spec("score_math", with_fe=True)
    seeds = [replication_seed(base_seed, r) for r in range(n_reps)]
    if n_jobs == 1:
        out = [_one_rep(config, spec, r, s, term) for r, s in enumerate(seeds)]
    else:
        out = Parallel(n_jobs=n_jobs)(delayed(_one_rep)(config, spec, r, s, term) for r, s in enumerate(seeds))
    est = np.array([o[0] for o in out])
    ses = np.array([o[1] for o in out])
    return MCResult(n_reps, true_att(config, spec.outcome), est, ses, np.array(seeds))


def run_placebo_mc(config: DGPConfig, n_reps: int, base_seed: int = 0, level: float = 0.05, n_jobs: int = 1):
    """Rejection rate of the placebo pre-trend test over ``n_reps`` panels."""
    from .did import placebo_pretrend

    def one(rep, seed):
        try:
            return placebo_pretrend(generate_panel(config.replace(seed=seed))).p_value
        except Exception as exc:
            raise ReplicationError(rep, seed, exc) from exc

    seeds = [replication_seed(base_seed, r) for r in range(n_reps)]
    if n_jobs == 1:
        pvals = [one(r, s) for r, s in enumerate(seeds)]
    else:
        pvals = Parallel(n_jobs=n_jobs)(delayed(one)(r, s) for r, s in enumerate(seeds))
    return float(np.mean(np.asarray(pvals) < level))


def run_model_mc(
    s_distribution: DistributionSpec,
    grid,
    n_draws: int,
    seed: int,
    n_schools: int = 10,
) -> pd.DataFrame:
    """One :class:`GainReport` per ``(per_school_budget, cap)`` cell of ``grid``.

    Every cell reuses ``seed``, so cells differ only through the budget and cap.
    """
    rows = []
    for budget, cap in grid:
        report: GainReport = expected_gains(s_distribution, n_schools, budget, cap, n_draws, seed)
        rows.append(
            {
                "distribution": str(s_distribution),
                "n_schools": n_schools,
                "per_school_budget": budget,
                "cap": cap,
                "n_draws": report.n_draws,
                "delta_centralized": report.delta_centralized,
                "rho_decentralized": report.rho_decentralized,
                "lambda_gain": report.lambda_gain,
                "standard_error": report.standard_error,
            }
        )
    return pd.DataFrame(rows)
