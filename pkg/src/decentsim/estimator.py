"""Least squares with school fixed effects and cluster-robust (CR1) variance."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import linalg
from scipy.stats import norm
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .panel import PanelDataset

RANK_TOL = 1e-10
ABSORB_TOL = 1e-9


class RankDeficientError(ValueError):
    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(
            "design matrix is rank deficient; collinear column(s): " + ", ".join(self.columns)
        )


def interaction_name(cols) -> str:
    return ":".join(cols)


@dataclass(frozen=True)
class RegressionSpec:
    """What to regress on what.

    ``interactions`` are tuples of column names entered as their product,
    named with ``:`` (``("post", "public")`` becomes ``post:public``). With a
    ``fixed_effect`` the design is demeaned within groups and carries no
    intercept. ``r2`` picks the reported R^2: ``"within"`` (on demeaned data)
    or ``"overall"`` (against the centered raw outcome).
    """

    outcome: str
    covariates: tuple[str, ...] = ()
    interactions: tuple[tuple[str, ...], ...] = ()
    fixed_effect: str | None = None
    cluster: str = "school_id"
    include_intercept: bool | None = None
    r2: str = "within"

    def __post_init__(self):
        object.__setattr__(self, "covariates", tuple(self.covariates))
        object.__setattr__(self, "interactions", tuple(tuple(i) for i in self.interactions))
        if self.fixed_effect is not None and self.include_intercept:
            raise ValueError("an intercept cannot be combined with a fixed effect")
        if self.r2 not in ("within", "overall"):
            raise ValueError(f"r2 must be 'within' or 'overall', got {self.r2!r}")
        for inter in self.interactions:
            if len(inter) < 2:
                raise ValueError(f"interaction {inter} needs at least two columns")

    @property
    def intercept(self) -> bool:
        if self.include_intercept is None:
            return self.fixed_effect is None
        return self.include_intercept

    @property
    def term_names(self) -> list[str]:
        return [*self.covariates, *(interaction_name(i) for i in self.interactions)]

    def required_columns(self) -> list[str]:
        cols = [self.outcome, *self.covariates, self.cluster]
        cols += [c for inter in self.interactions for c in inter]
        if self.fixed_effect:
            cols.append(self.fixed_effect)
        return list(dict.fromkeys(cols))


@dataclass(frozen=True)
class FitResult:
    names: tuple[str, ...]
    params: np.ndarray
    vcov: np.ndarray
    r_squared: float
    n_obs: int
    n_clusters: int
    residuals: np.ndarray = field(repr=False)
    absorbed: tuple[str, ...] = ()
    fixed_effect: str | None = None
    outcome: str = ""
    r_squared_within: float | None = None
    r_squared_overall: float | None = None

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.vcov), 0.0, None))

    @property
    def t_stats(self) -> np.ndarray:
        se = self.se
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(se > 0, self.params / se, np.nan)

    @property
    def pvalues(self) -> np.ndarray:
        return 2.0 * norm.sf(np.abs(self.t_stats))

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            if name in self.absorbed:
                raise KeyError(f"{name!r} was absorbed by the {self.fixed_effect} fixed effect") from None
            raise KeyError(f"no coefficient named {name!r}") from None

    def coef(self, name: str) -> float:
        return float(self.params[self.index(name)])

    def stderr(self, name: str) -> float:
        return float(self.se[self.index(name)])

    def tstat(self, name: str) -> float:
        return float(self.t_stats[self.index(name)])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"estimate": self.params, "se": self.se, "t": self.t_stats, "p": self.pvalues},
            index=pd.Index(self.names, name="term"),
        )


def solve_least_squares(design, outcome, names=None):
    """Least-squares coefficients and residuals via a QR decomposition.

    A column whose diagonal entry in ``R`` is negligible relative to its own
    norm lies in the span of the columns before it; such columns are reported
    by name in a :class:`RankDeficientError`.
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(outcome, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, k = X.shape
    if names is None:
        names = [f"x{j}" for j in range(k)]
    if y.shape != (n,):
        raise ValueError(f"outcome has shape {y.shape}, expected ({n},)")
    if n < k:
        raise ValueError(f"{n} observations cannot identify {k} coefficients")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("design and outcome must be finite")
    q, r = linalg.qr(X, mode="economic")
    diag = np.abs(np.diag(r))
    col_norm = np.linalg.norm(X, axis=0)
    # |R_jj| is the norm of column j orthogonal to the columns before it.
    bad = [names[j] for j in range(k) if col_norm[j] == 0 or diag[j] <= RANK_TOL * col_norm[j]]
    if bad:
        raise RankDeficientError(bad)
    beta = linalg.solve_triangular(r, q.T @ y)
    return beta, y - X @ beta


def group_codes(values) -> tuple[np.ndarray, int]:
    codes, uniques = pd.factorize(np.asarray(values), sort=True)
    return codes, len(uniques)


def demean(matrix, codes, n_groups):
    """Subtract group means from each column of ``matrix``."""
    M = np.asarray(matrix, dtype=float)
    flat = M.ndim == 1
    if flat:
        M = M[:, None]
    counts = np.bincount(codes, minlength=n_groups).astype(float)
    out = np.empty_like(M)
    for j in range(M.shape[1]):
        means = np.bincount(codes, weights=M[:, j], minlength=n_groups) / counts
        out[:, j] = M[:, j] - means[codes]
    return out[:, 0] if flat else out


def _frame(dataset) -> pd.DataFrame:
    return dataset.frame if isinstance(dataset, PanelDataset) else dataset


def build_design(dataset, spec: RegressionSpec) -> tuple[np.ndarray, list[str]]:
    """Covariate and interaction columns, plus an intercept if the spec has one."""
    df = _frame(dataset)
    missing = [c for c in spec.required_columns() if c not in df.columns]
    if missing:
        raise KeyError(f"column(s) not in dataset: {', '.join(missing)}")
    cols, names = [], []
    if spec.intercept:
        cols.append(np.ones(len(df)))
        names.append("const")
    for c in spec.covariates:
        cols.append(df[c].to_numpy(dtype=float))
        names.append(c)
    for inter in spec.interactions:
        prod = np.ones(len(df))
        for c in inter:
            prod = prod * df[c].to_numpy(dtype=float)
        cols.append(prod)
        names.append(interaction_name(inter))
    X = np.column_stack(cols) if cols else np.empty((len(df), 0))
    return X, names


def within_transform(dataset, spec: RegressionSpec):
    """Demean the outcome and every design column within ``spec.fixed_effect`` groups.

    Returns ``(X, y, names, absorbed)``. Columns that are constant within every
    group become zero; they are dropped from ``X`` and listed in ``absorbed``.
    """
    if spec.fixed_effect is None:
        raise ValueError("within_transform needs a fixed_effect column")
    df = _frame(dataset)
    X, names = build_design(df, spec)
    codes, n_groups = group_codes(df[spec.fixed_effect])
    Xd = demean(X, codes, n_groups)
    yd = demean(df[spec.outcome].to_numpy(dtype=float), codes, n_groups)
    keep, absorbed = [], []
    for j, name in enumerate(names):
        scale = 1.0 + np.abs(X[:, j]).max(initial=0.0)
        if np.abs(Xd[:, j]).max(initial=0.0) <= ABSORB_TOL * scale:
            absorbed.append(name)
        else:
            keep.append(j)
    return Xd[:, keep], yd, [names[j] for j in keep], absorbed


def cluster_robust_vcov(design, residuals, cluster_ids, *, small_sample=True):
    """CR1 sandwich ``(X'X)^-1 (sum_g X_g'u_g u_g'X_g) (X'X)^-1``.

    The small-sample factor is ``G/(G-1) * (N-1)/(N-K)`` with ``K`` the number
    of columns of ``design``.
    """
    X = np.asarray(design, dtype=float)
    u = np.asarray(residuals, dtype=float)
    n, k = X.shape
    if u.shape != (n,) or len(cluster_ids) != n:
        raise ValueError("design, residuals and cluster ids must have matching lengths")
    codes, G = group_codes(cluster_ids)
    if G < 2:
        raise ValueError("cluster-robust variance needs at least two clusters")
    scores = np.zeros((G, k))
    np.add.at(scores, codes, X * u[:, None])
    bread = np.linalg.inv(X.T @ X)
    meat = scores.T @ scores
    V = bread @ meat @ bread
    if small_sample:
        V = V * (G / (G - 1)) * ((n - 1) / (n - k))
    return (V + V.T) / 2


def _check_did_cells(df: pd.DataFrame, spec: RegressionSpec) -> None:
    for inter in spec.interactions:
        if len(inter) != 2:
            continue
        a, b = (df[c] for c in inter)
        if not (set(a.unique()) <= {0, 1} and set(b.unique()) <= {0, 1}):
            continue
        cells = pd.crosstab(a.astype(int), b.astype(int)).reindex(index=[0, 1], columns=[0, 1], fill_value=0)
        empty = [f"{inter[0]}={i}, {inter[1]}={j}" for i in (0, 1) for j in (0, 1) if cells.loc[i, j] == 0]
        if empty:
            raise ValueError(f"empty difference-in-differences cell(s): {'; '.join(empty)}")


def fit(dataset, spec: RegressionSpec) -> FitResult:
    """OLS (optionally within-transformed) with CR1 variance clustered on ``spec.cluster``."""
    df = _frame(dataset)
    missing = [c for c in spec.required_columns() if c not in df.columns]
    if missing:
        raise KeyError(f"column(s) not in dataset: {', '.join(missing)}")
    clusters = df[spec.cluster].to_numpy()
    if pd.Series(clusters).nunique() < 2:
        raise ValueError(f"cluster column {spec.cluster!r} needs at least two distinct values")
    _check_did_cells(df, spec)

    y = df[spec.outcome].to_numpy(dtype=float)
    if spec.fixed_effect is None:
        X, names = build_design(df, spec)
        absorbed = []
        y_fit = y
    else:
        X, y_fit, names, absorbed = within_transform(df, spec)
    if X.shape[1] == 0:
        raise ValueError("no estimable coefficients left in the design")
    beta, resid = solve_least_squares(X, y_fit, names)
    vcov = cluster_robust_vcov(X, resid, clusters)

    ssr = float(resid @ resid)
    sst_overall = float(((y - y.mean()) ** 2).sum())
    r2_overall = 1.0 - ssr / sst_overall if sst_overall > 0 else 0.0
    if spec.fixed_effect is not None:
        sst_within = float(y_fit @ y_fit)
        r2_within = 1.0 - ssr / sst_within if sst_within > 0 else 0.0
    elif spec.intercept:
        r2_within = r2_overall
    else:
        sst_raw = float(y @ y)
        r2_within = r2_overall = 1.0 - ssr / sst_raw if sst_raw > 0 else 0.0
    r2 = r2_within if spec.r2 == "within" else r2_overall
    return FitResult(
        names=tuple(names),
        params=beta,
        vcov=vcov,
        r_squared=float(min(max(r2, 0.0), 1.0)),
        n_obs=len(df),
        n_clusters=int(pd.Series(clusters).nunique()),
        residuals=resid,
        absorbed=tuple(absorbed),
        fixed_effect=spec.fixed_effect,
        outcome=spec.outcome,
        r_squared_within=r2_within,
        r_squared_overall=r2_overall,
    )


class FixedEffectsOLS(RegressorMixin, BaseEstimator):
    """scikit-learn regressor for OLS with an optional absorbed group effect.

    ``X`` is a DataFrame. The columns named by ``fixed_effect`` and ``cluster``
    are used for demeaning and variance clustering and are not regressors;
    all remaining columns are. Without ``cluster`` each row is its own
    cluster, which gives the HC1 heteroskedasticity-robust variance.
    """

    def __init__(self, fixed_effect=None, cluster=None, fit_intercept=True, r2="within"):
        self.fixed_effect = fixed_effect
        self.cluster = cluster
        self.fit_intercept = fit_intercept
        self.r2 = r2

    def _features(self, X):
        if not isinstance(X, pd.DataFrame):
            raise TypeError("X must be a pandas DataFrame with named columns")
        drop = {c for c in (self.fixed_effect, self.cluster) if c is not None}
        return [c for c in X.columns if c not in drop]

    def fit(self, X, y):
        features = self._features(X)
        y = np.asarray(y, dtype=float).ravel()
        if len(y) != len(X):
            raise ValueError(f"X has {len(X)} rows but y has {len(y)}")
        df = X.reset_index(drop=True).copy()
        df["__y__"] = y
        cluster = self.cluster
        if cluster is None:
            cluster = "__row__"
            df[cluster] = np.arange(len(df))
        spec = RegressionSpec(
            outcome="__y__",
            covariates=tuple(features),
            fixed_effect=self.fixed_effect,
            cluster=cluster,
            include_intercept=bool(self.fit_intercept) if self.fixed_effect is None else False,
            r2=self.r2,
        )
        result = fit(df, spec)
        self.result_ = result
        self.feature_names_in_ = np.asarray(features, dtype=object)
        self.n_features_in_ = len(features)
        coef = dict(zip(result.names, result.params))
        self.coef_ = np.array([coef.get(c, 0.0) for c in features])
        self.intercept_ = float(coef.get("const", 0.0))
        self.vcov_ = result.vcov
        self.absorbed_ = result.absorbed
        if self.fixed_effect is not None:
            partial = y - df[features].to_numpy(dtype=float) @ self.coef_
            self.group_effects_ = pd.Series(partial).groupby(df[self.fixed_effect].to_numpy()).mean()
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        features = list(self.feature_names_in_)
        missing = [c for c in features if c not in X.columns]
        if missing:
            raise KeyError(f"column(s) missing from X: {', '.join(missing)}")
        pred = X[features].to_numpy(dtype=float) @ self.coef_ + self.intercept_
        if self.fixed_effect is not None:
            effects = X[self.fixed_effect].map(self.group_effects_)
            if effects.isna().any():
                raise ValueError(f"unseen {self.fixed_effect} value(s) in X")
            pred = pred + effects.to_numpy(dtype=float)
        return pred
