"""Hierarchy model of resource allocation under centralized and decentralized rule.

A school produces human capital ``h = e + s * l0 + s * dl`` where ``s`` is how
well extra resources match the school's needs. The central government cannot
observe ``s`` and hands every school the same increment. A municipality that
observes ``s`` may reallocate the same total budget subject to each school
keeping ``s_i * dl_i >= s_i * mean(dl)``; it picks the reallocation with the
largest aggregate gain.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import ndtr, ndtri
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

FEASIBILITY_TOL = 1e-9
DEFAULT_CAP_RATIO = 3.0


@dataclass(frozen=True)
class School:
    id: int
    s: float
    e: float = 0.0
    l0: float = 0.0
    is_public: bool = True
    is_anglophone: bool = False
    municipality_id: int = 0

    def __post_init__(self):
        for name in ("s", "e", "l0"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"school {self.id}: {name} must be finite")
        if self.l0 < 0:
            raise ValueError(f"school {self.id}: l0 must be >= 0, got {self.l0}")


@dataclass(frozen=True)
class AllocationPlan:
    """Resource increments aligned with a list of schools.

    The constructor does not enforce feasibility; use :func:`check_feasibility`.
    """

    increments: tuple[float, ...]
    per_school_budget: float

    @property
    def total_budget(self) -> float:
        return len(self.increments) * self.per_school_budget

    def objective(self, s: Sequence[float]) -> float:
        """Aggregate gain ``sum(s_i * dl_i)``."""
        return float(np.dot(np.asarray(s, dtype=float), np.asarray(self.increments)))


@dataclass(frozen=True)
class GainReport:
    delta_centralized: float
    rho_decentralized: float
    n_draws: int
    standard_error: float
    per_draw_lambda: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.n_draws < 1:
            raise ValueError("n_draws must be >= 1")

    @property
    def lambda_gain(self) -> float:
        return self.rho_decentralized - self.delta_centralized


@dataclass(frozen=True)
class DistributionSpec:
    """Distribution of school compatibility ``s``.

    ``family`` is one of ``point`` (params: value), ``uniform`` (low, high) or
    ``normal`` (mean, sd; truncated at four sd on each side).
    """

    family: str
    params: tuple[float, ...]

    def __post_init__(self):
        n_params = {"point": 1, "uniform": 2, "normal": 2}
        if self.family not in n_params:
            raise ValueError(
                f"unsupported distribution family {self.family!r}; "
                f"expected one of {sorted(n_params)}"
            )
        if len(self.params) != n_params[self.family]:
            raise ValueError(
                f"{self.family} takes {n_params[self.family]} parameter(s), got {len(self.params)}"
            )
        if not all(math.isfinite(p) for p in self.params):
            raise ValueError("distribution parameters must be finite")
        if self.family == "uniform" and self.params[1] < self.params[0]:
            raise ValueError("uniform requires low <= high")
        if self.family == "normal" and self.params[1] < 0:
            raise ValueError("normal requires sd >= 0")

    @classmethod
    def parse(cls, text: str) -> "DistributionSpec":
        """Parse ``"uniform(-1, 1)"``, ``"normal(0, 1)"`` or ``"point(0.5)"``."""
        text = text.strip()
        if not text.endswith(")") or "(" not in text:
            raise ValueError(f"cannot parse distribution {text!r}")
        family, _, rest = text[:-1].partition("(")
        params = tuple(float(p) for p in rest.split(",") if p.strip())
        return cls(family.strip().lower(), params)

    def __str__(self) -> str:
        return f"{self.family}({', '.join(repr(p) for p in self.params)})"

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        # Every family is an increasing transform of the same uniforms, so two
        # specs drawn from the same generator state are comonotone.
        u = rng.random(size)
        if self.family == "point":
            return np.full(size, self.params[0])
        if self.family == "uniform":
            low, high = self.params
            return low + (high - low) * u
        mean, sd = self.params
        lo, hi = ndtr(-4.0), ndtr(4.0)
        return mean + sd * ndtri(lo + (hi - lo) * u)


def produce_human_capital(school: School, delta_l: float) -> float:
    """Output of ``school`` after receiving ``delta_l`` extra resources."""
    if not math.isfinite(delta_l):
        raise ValueError("delta_l must be finite")
    if delta_l < 0:
        raise ValueError(f"delta_l must be >= 0, got {delta_l}")
    return school.e + school.s * school.l0 + school.s * delta_l


def uniform_allocation(n_schools: int, per_school_budget: float) -> AllocationPlan:
    if n_schools < 1:
        raise ValueError("n_schools must be >= 1")
    if not per_school_budget > 0:
        raise ValueError("per_school_budget must be > 0")
    return AllocationPlan((float(per_school_budget),) * n_schools, float(per_school_budget))


def _bounds(s: np.ndarray, budget: float, cap: float) -> tuple[np.ndarray, np.ndarray]:
    # s_i * dl_i >= s_i * budget reads dl_i >= budget when s_i > 0 and
    # dl_i <= budget when s_i < 0.
    lower = np.where(s > 0, budget, 0.0)
    upper = np.where(s < 0, budget, cap)
    return lower, upper


def _informed_increments(s: np.ndarray, budget: float, cap: float) -> np.ndarray:
    """Greedy transfer from the uniform plan, lowest-s donors to highest-s receivers.

    Stops once no donor has strictly smaller ``s`` than any receiver with spare
    room, which is the optimality condition of this box-and-sum LP.
    """
    n = s.shape[0]
    x = np.full(n, float(budget))
    lower, upper = _bounds(s, budget, cap)
    ids = np.arange(n)
    receivers = np.lexsort((ids, -s))  # s descending, id ascending
    donors = np.lexsort((-ids, s))  # s ascending, id descending
    r = d = 0
    while r < n and d < n:
        i, j = receivers[r], donors[d]
        if s[j] >= s[i]:
            break
        room = upper[i] - x[i]
        if room <= 0:
            r += 1
            continue
        spare = x[j] - lower[j]
        if spare <= 0:
            d += 1
            continue
        amount = min(room, spare)
        x[i] += amount
        x[j] -= amount
    return x


def informed_allocation(
    schools: Sequence[School], per_school_budget: float, cap: float | None = None
) -> AllocationPlan:
    """Gain-maximizing reallocation of ``N * per_school_budget`` among ``schools``.

    ``cap`` bounds any single increment and defaults to three times the
    per-school budget. Ties in ``s`` go to the lower school id.
    """
    if not per_school_budget > 0:
        raise ValueError("per_school_budget must be > 0")
    if cap is None:
        cap = DEFAULT_CAP_RATIO * per_school_budget
    if cap < per_school_budget:
        raise ValueError(
            f"infeasible bounds: cap {cap} is below the per-school budget {per_school_budget}"
        )
    if len(schools) == 0:
        raise ValueError("need at least one school")
    order = np.argsort([sc.id for sc in schools], kind="stable")
    s = np.array([schools[k].s for k in order], dtype=float)
    x_sorted = _informed_increments(s, per_school_budget, cap)
    x = np.empty_like(x_sorted)
    x[order] = x_sorted
    return AllocationPlan(tuple(float(v) for v in x), float(per_school_budget))


def check_feasibility(
    plan: AllocationPlan, schools: Sequence[School], tol: float = FEASIBILITY_TOL
) -> tuple[bool, list[str]]:
    """Check the budget constraint and each school's membership condition.

    Returns ``(ok, violations)``; violations are human-readable strings.
    Negative increments are reported as violations as well.
    """
    if len(plan.increments) != len(schools):
        raise ValueError(
            f"plan has {len(plan.increments)} increments but {len(schools)} schools were given"
        )
    x = np.asarray(plan.increments, dtype=float)
    violations = []
    if abs(x.sum() - plan.total_budget) > tol:
        violations.append(f"budget: sum of increments {x.sum():g} != {plan.total_budget:g}")
    mean_inc = x.sum() / len(x)
    for school, inc in zip(schools, x):
        if inc < -tol:
            violations.append(f"school {school.id}: negative increment {inc:g}")
        if school.s * inc < school.s * mean_inc - tol:
            violations.append(
                f"school {school.id}: s*dl = {school.s * inc:g} < s*mean = {school.s * mean_inc:g}"
            )
    return not violations, violations


def draw_gain(s: np.ndarray, per_school_budget: float, cap: float) -> tuple[float, float]:
    """Per-school average gain under uniform and informed allocation for one draw."""
    n = s.shape[0]
    uniform = np.full(n, float(per_school_budget))
    informed = _informed_increments(s, per_school_budget, cap)
    return float(np.dot(s, uniform)) / n, float(np.dot(s, informed)) / n


def draw_rng(seed: int, index: int) -> np.random.Generator:
    """Generator for draw ``index`` of a run seeded with ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def expected_gains(
    s_distribution: DistributionSpec,
    n_schools: int,
    per_school_budget: float,
    cap: float | None = None,
    n_draws: int = 1000,
    seed: int = 0,
    keep_draws: bool = False,
) -> GainReport:
    """Monte Carlo estimate of the centralized and decentralized expected gains.

    Raises ``AssertionError`` if any draw has the informed allocation doing
    worse than the uniform one (it never should: the uniform plan is feasible).
    """
    if not isinstance(s_distribution, DistributionSpec):
        raise ValueError(f"unsupported distribution {s_distribution!r}")
    if n_draws < 1:
        raise ValueError("n_draws must be >= 1")
    if n_schools < 1:
        raise ValueError("n_schools must be >= 1")
    if not per_school_budget > 0:
        raise ValueError("per_school_budget must be > 0")
    if cap is None:
        cap = DEFAULT_CAP_RATIO * per_school_budget
    if cap < per_school_budget:
        raise ValueError("cap must be >= per_school_budget")

    deltas = np.empty(n_draws)
    rhos = np.empty(n_draws)
    for k in range(n_draws):
        s = s_distribution.sample(draw_rng(seed, k), n_schools)
        deltas[k], rhos[k] = draw_gain(s, per_school_budget, cap)
        if rhos[k] < deltas[k] - 1e-12:
            raise AssertionError(f"draw {k}: informed gain {rhos[k]} below uniform {deltas[k]}")
    lam = rhos - deltas
    se = float(lam.std(ddof=1) / math.sqrt(n_draws)) if n_draws > 1 else 0.0
    return GainReport(
        delta_centralized=float(deltas.mean()),
        rho_decentralized=float(rhos.mean()),
        n_draws=n_draws,
        standard_error=se,
        per_draw_lambda=lam if keep_draws else None,
    )


class InformedAllocator(BaseEstimator):
    """Estimator-style wrapper around :func:`informed_allocation`.

    ``fit(s)`` takes a 1-d array of compatibilities (position = school id) and
    stores ``increments_``, ``objective_`` and ``uniform_objective_``.
    """

    def __init__(self, per_school_budget=1.0, cap=None):
        self.per_school_budget = per_school_budget
        self.cap = cap

    def fit(self, s, y=None):
        s = check_array(np.asarray(s, dtype=float).reshape(-1, 1), ensure_min_samples=1).ravel()
        schools = [School(id=i, s=float(v)) for i, v in enumerate(s)]
        plan = informed_allocation(schools, self.per_school_budget, self.cap)
        self.plan_ = plan
        self.increments_ = np.asarray(plan.increments)
        self.objective_ = float(np.dot(s, self.increments_))
        self.uniform_objective_ = float(np.dot(s, np.full(s.shape[0], float(self.per_school_budget))))
        return self

    def transform(self, s):
        """Human-capital gain ``s_i * dl_i`` per school for the fitted plan."""
        check_is_fitted(self, "increments_")
        s = np.asarray(s, dtype=float).ravel()
        if s.shape[0] != self.increments_.shape[0]:
            raise ValueError("s must have one entry per fitted school")
        return s * self.increments_
