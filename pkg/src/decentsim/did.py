"""Difference-in-differences designs for public (treated) vs private schools."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.stats import norm

from .estimator import FitResult, RegressionSpec, fit
from .panel import PanelDataset, require_did_cells

TREATMENT = "post:public"
PUPIL_COVARIATES = ("age", "girl", "books", "electricity", "anglophone", "grade_high")


@dataclass(frozen=True)
class DiDSummary:
    att_estimate: float
    se: float
    t_stat: float
    cell_means: pd.DataFrame = field(repr=False)
    label: str = ""
    heterogeneity: dict = field(default_factory=dict)
    fit: FitResult | None = field(default=None, repr=False)

    @property
    def p_value(self) -> float:
        return float(2 * norm.sf(abs(self.t_stat)))

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "att_estimate": self.att_estimate,
            "se": self.se,
            "t_stat": self.t_stat,
            "p_value": self.p_value,
            "cell_means": {
                f"{period}_{group}": float(self.cell_means.loc[period, group])
                for period in self.cell_means.index
                for group in self.cell_means.columns
            },
            "heterogeneity": {
                k: {"estimate": e, "se": s, "t": t} for k, (e, s, t) in self.heterogeneity.items()
            },
        }


@dataclass(frozen=True)
class PlaceboResult:
    estimate: float
    se: float
    t_stat: float
    p_value: float
    n_obs: int


def _frame(dataset) -> pd.DataFrame:
    return dataset.frame if isinstance(dataset, PanelDataset) else dataset


def cell_means(df: pd.DataFrame, outcome: str, post: str = "post", treated: str = "public") -> pd.DataFrame:
    """2x2 table of mean outcomes, rows ``pre``/``post`` and columns ``private``/``public``."""
    require_did_cells(df, post, treated)
    means = df.groupby([df[post].astype(int), df[treated].astype(int)])[outcome].mean()
    table = pd.DataFrame(
        [[means[(0, 0)], means[(0, 1)]], [means[(1, 0)], means[(1, 1)]]],
        index=["pre", "post"],
        columns=["private", "public"],
    )
    return table


def att_from_cells(cells: pd.DataFrame) -> float:
    return float(
        (cells.loc["post", "public"] - cells.loc["pre", "public"])
        - (cells.loc["post", "private"] - cells.loc["pre", "private"])
    )


def _summary(result: FitResult, cells, label, heterogeneity=None) -> DiDSummary:
    return DiDSummary(
        att_estimate=result.coef(TREATMENT),
        se=result.stderr(TREATMENT),
        t_stat=result.tstat(TREATMENT),
        cell_means=cells,
        label=label,
        heterogeneity=heterogeneity or {},
        fit=result,
    )


def saturated_spec(outcome: str, cluster: str = "school_id") -> RegressionSpec:
    return RegressionSpec(outcome, ("post", "public"), (("post", "public"),), cluster=cluster)


def two_by_two(dataset, outcome: str = "score_math", cluster: str = "school_id") -> DiDSummary:
    """Canonical 2x2 estimate from cell means.

    The standard error comes from the saturated regression on the same rows,
    whose interaction coefficient equals the cell-mean contrast.
    """
    df = _frame(dataset)
    cells = cell_means(df, outcome)
    result = fit(df, saturated_spec(outcome, cluster))
    se = result.stderr(TREATMENT)
    att = att_from_cells(cells)
    return DiDSummary(att, se, att / se if se > 0 else float("nan"), cells, "2x2 means", fit=result)


def main_spec(outcome: str, with_fe: bool = True, grade2_only: bool = False, cluster: str = "school_id") -> RegressionSpec:
    covariates = [c for c in PUPIL_COVARIATES if not (grade2_only and c == "grade_high")]
    return RegressionSpec(
        outcome,
        ("post", "public", *covariates),
        (("post", "public"),),
        fixed_effect="school_id" if with_fe else None,
        cluster=cluster,
    )


def _require(df: pd.DataFrame, columns) -> None:
    missing = [c for c in columns if c not in df.columns]
    if missing:
        raise KeyError(f"dataset is missing required column(s): {', '.join(missing)}")


def fit_main_spec(
    dataset, outcome: str = "score_math", with_fe: bool = True, grade2_only: bool = False,
    cluster: str = "school_id",
) -> DiDSummary:
    """Outcome on period, group, their product and the pupil covariates.

    ``grade2_only`` keeps Grade 2 pupils and drops the higher-grades dummy.
    """
    df = _frame(dataset)
    _require(df, (outcome, "post", "public", "school_id", cluster, *PUPIL_COVARIATES))
    if grade2_only:
        df = df.loc[df["grade_high"] == 0]
    result = fit(df, main_spec(outcome, with_fe, grade2_only, cluster))
    label = f"{outcome}{' FE' if with_fe else ''}{' grade 2' if grade2_only else ''}"
    return _summary(result, cell_means(df, outcome), label)


def fit_heterogeneity(
    dataset, outcome: str = "score_math", moderator: str = "anglophone",
    covariates=PUPIL_COVARIATES, cluster: str = "school_id",
) -> DiDSummary:
    """School fixed-effects DiD with the effect allowed to differ by a binary moderator.

    Adds ``post:public:<moderator>`` and ``post:<moderator>``; the moderator
    level and ``public:<moderator>`` are reported as absorbed when they are
    constant within school.
    """
    df = _frame(dataset)
    _require(df, (outcome, "post", "public", "school_id", moderator, *covariates))
    values = set(pd.unique(df[moderator]))
    if not values <= {0, 1, True, False}:
        raise ValueError(f"moderator {moderator!r} must be binary (0/1), found values {sorted(values)[:5]}")
    if len(values) < 2:
        raise ValueError(f"moderator {moderator!r} is constant; the interaction is not identified")
    covs = tuple(dict.fromkeys(("post", "public", *covariates, moderator)))
    spec = RegressionSpec(
        outcome,
        covs,
        (("post", "public"), ("post", moderator), ("public", moderator), ("post", "public", moderator)),
        fixed_effect="school_id",
        cluster=cluster,
    )
    result = fit(df, spec)
    name = f"post:public:{moderator}"
    if name not in result.names:
        raise ValueError(f"{name} was absorbed; the moderator does not vary within the design")
    het = {name: (result.coef(name), result.stderr(name), result.tstat(name))}
    return _summary(result, cell_means(df, outcome), f"{outcome} FE x {moderator}", het)


def placebo_pretrend(dataset, outcome: str = "score_math", cluster: str = "school_id") -> PlaceboResult:
    """Fake treatment in the last pre-treatment period, estimated on pre-treatment rows only.

    Compares the last pre-period with the one before it (school fixed effects,
    clustered by school). Under parallel trends the estimate is centred on zero.
    """
    df = _frame(dataset)
    periods = sorted(pd.unique(df["period"]))
    if len(periods) < 3:
        raise ValueError(
            f"insufficient pre-periods: placebo test needs >= 3 periods, dataset has {len(periods)}"
        )
    last_pre, before = periods[-2], periods[-3]
    pre = df.loc[df["period"].isin([before, last_pre])].copy()
    pre["post"] = (pre["period"] == last_pre).astype(int)
    spec = RegressionSpec(outcome, ("post",), (("post", "public"),), fixed_effect="school_id", cluster=cluster)
    result = fit(pre, spec)
    est, se = result.coef(TREATMENT), result.stderr(TREATMENT)
    t = est / se if se > 0 else (0.0 if est == 0 else float("inf"))
    return PlaceboResult(est, se, t, float(2 * norm.sf(abs(t))), result.n_obs)
