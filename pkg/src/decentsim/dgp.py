"""Synthetic pupil-level panels for public (treated) and private (control) schools.

Each pupil-period outcome is built as

    theta0 + Z'theta1 + theta_grade_high*grade_high + theta_anglophone*anglophone
    + W'theta2 + alpha0*P + alpha1*dT + lambda_i*dT*P
    + eps0 + eps1*(mu0 + mu1*dT + mu2*P + eps2)
    + pretrend_gap*P*t   (pre-treatment periods only)
    + school effect

with the school-level effect ``lambda_i`` drawn once per school around the
configured average effect. ``eps0`` has a school-period component (so errors
are correlated within school) and a pupil component. ``eps1`` and ``eps2``
are pupil-level; in the decentralized cell (public school, post period) they
are correlated with ``selection_corr``, which makes the extra resources
selective on the unobserved compatibility shock.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .panel import PanelDataset, schema_columns

PUPIL_COVARIATES = ("age", "girl", "books", "electricity")


@dataclass(frozen=True)
class DGPConfig:
    n_municipalities: int = 50
    schools_per_municipality: int = 4
    pupils_per_school: int = 15
    share_public: float = 0.75
    share_anglophone: float = 0.284
    share_grade_high: float = 0.6
    theta0: float = 50.0
    theta1: tuple[float, ...] = (-0.5, -0.5, 3.0, 2.0)
    theta2: tuple[float, ...] = (1.0, 0.5)
    theta_grade_high: float = -10.16
    theta_anglophone: float = 9.388
    alpha0: float = -11.93
    alpha1: float = -16.44
    lambda0: float = 10.2
    lambda0_lit: float = 15.39
    lambda0_grade2: float | None = None
    lambda_anglophone_gap: float = 0.0
    lambda_spread: float = 1.0
    mu0: float = 1.0
    mu1: float = 0.0
    mu2: float = 0.0
    sd_eps0: float = 10.0
    sd_eps1: float = 1.0
    sd_eps2: float = 1.0
    sd_school: float = 5.0
    school_share: float = 0.2
    selection_corr: float = 0.0
    pretrend_gap: float = 0.0
    n_periods: int = 2
    seed: int = 42

    def __post_init__(self):
        object.__setattr__(self, "theta1", tuple(float(v) for v in self.theta1))
        object.__setattr__(self, "theta2", tuple(float(v) for v in self.theta2))
        self.validate()

    def validate(self) -> None:
        for name in ("n_municipalities", "schools_per_municipality", "pupils_per_school"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("share_public", "share_anglophone", "share_grade_high", "school_share"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        for name in ("lambda_spread", "sd_eps0", "sd_eps1", "sd_eps2", "sd_school"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not -1.0 <= self.selection_corr <= 1.0:
            raise ValueError("selection_corr must lie in [-1, 1]")
        if self.n_periods < 2:
            raise ValueError("n_periods must be >= 2")
        if len(self.theta1) != len(PUPIL_COVARIATES):
            raise ValueError(f"theta1 needs {len(PUPIL_COVARIATES)} entries (one per {PUPIL_COVARIATES})")

    @property
    def n_schools(self) -> int:
        return self.n_municipalities * self.schools_per_municipality

    def replace(self, **changes) -> "DGPConfig":
        return dataclasses.replace(self, **changes)


def true_att(config: DGPConfig, outcome: str = "score_math") -> float:
    """Average effect on treated schools built into ``config``.

    With a non-zero ``lambda_anglophone_gap`` this is the effect for
    francophone schools; anglophone schools get the gap on top.
    """
    if outcome == "score_lit":
        return config.lambda0_lit
    return config.lambda0


def _school_stream(seed: int, kind: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(kind, index)))


def _outcome(cfg, base, effect, P, dT, t, ce, noise):
    """One outcome column from its three standard-normal noise draws."""
    pupil_noise, z1, z2 = noise
    eps0 = cfg.sd_eps0 * (math.sqrt(cfg.school_share) * ce + math.sqrt(1 - cfg.school_share) * pupil_noise)
    corr = np.where(dT * P == 1, cfg.selection_corr, 0.0)
    eps1 = cfg.sd_eps1 * z1
    eps2 = cfg.sd_eps2 * (corr * z1 + np.sqrt(1.0 - corr**2) * z2)
    resources = cfg.mu0 + cfg.mu1 * dT + cfg.mu2 * P + eps2
    pre = t < cfg.n_periods - 1
    return base + effect * dT * P + eps0 + eps1 * resources + cfg.pretrend_gap * P * t * pre


def _school_draws(cfg: DGPConfig, school_id: int):
    """All random numbers one school needs, from that school's own substream."""
    rng = _school_stream(cfg.seed, 1, school_id)
    n = cfg.n_periods * cfg.pupils_per_school
    scalars = rng.random(1)[0], *rng.standard_normal(2)
    school_period = rng.standard_normal(cfg.n_periods)
    w = rng.standard_normal((cfg.n_periods, len(cfg.theta2)))
    u = rng.random((5, n))
    z = rng.standard_normal((6, n))
    return scalars, school_period, w, u, z


def generate_panel(config: DGPConfig) -> PanelDataset:
    """Simulate a panel; identical configs (seed included) give identical data.

    Schools and municipalities draw from their own seed substreams, so a
    school's rows do not depend on how many other schools are generated.
    """
    cfg = config
    cfg.validate()
    T, n_p, S = cfg.n_periods, cfg.pupils_per_school, cfg.n_schools
    n = T * n_p
    muni_anglo = np.array(
        [_school_stream(cfg.seed, 0, m).random() < cfg.share_anglophone for m in range(cfg.n_municipalities)],
        dtype=int,
    )
    draws = [_school_draws(cfg, i) for i in range(S)]
    scalars = np.array([d[0] for d in draws])
    public_s = (scalars[:, 0] < cfg.share_public).astype(int)
    n_public = int(public_s.sum())
    if n_public == 0 or n_public == S:
        raise ValueError(
            f"degenerate design: {n_public} of {S} schools are public; "
            "both public and private schools are needed"
        )
    school_period = np.stack([d[1] for d in draws])  # (S, T)
    w_school = np.stack([d[2] for d in draws])  # (S, T, K)
    u = np.concatenate([d[3] for d in draws], axis=1)  # (5, S*n)
    z = np.concatenate([d[4] for d in draws], axis=1)  # (6, S*n)

    school = np.repeat(np.arange(S), n)
    municipality = school // cfg.schools_per_municipality
    t = np.tile(np.repeat(np.arange(T), n_p), S)
    dT = (t == T - 1).astype(int)
    P = public_s[school]
    anglophone = muni_anglo[municipality]
    grade_high = (u[0] < cfg.share_grade_high).astype(int)
    age = np.where(grade_high == 1, 10, 6) + np.floor(4 * u[1]).astype(int)
    girl = (u[2] < 0.5).astype(int)
    books = (u[3] < np.where(P == 1, 0.35, 0.5)).astype(int)
    electricity = (u[4] < np.where(P == 1, 0.45, 0.6) + 0.1 * anglophone).astype(int)
    Z = np.column_stack([age, girl, books, electricity]).astype(float)
    W = w_school[school, t]

    base = (
        cfg.theta0
        + Z @ np.asarray(cfg.theta1)
        + W @ np.asarray(cfg.theta2)
        + cfg.theta_grade_high * grade_high
        + cfg.theta_anglophone * anglophone
        + cfg.alpha0 * P
        + cfg.alpha1 * dT
        + cfg.sd_school * scalars[school, 1]
    )
    lam_low = cfg.lambda0 if cfg.lambda0_grade2 is None else cfg.lambda0_grade2
    effect_math = np.where(grade_high == 1, cfg.lambda0, lam_low) + cfg.lambda_spread * scalars[school, 2]
    effect_math = effect_math + cfg.lambda_anglophone_gap * anglophone
    effect_lit = effect_math + (cfg.lambda0_lit - cfg.lambda0)
    ce = school_period[school, t]

    rows = {
        "pupil_id": np.arange(S * n),
        "school_id": school,
        "municipality_id": municipality,
        "period": t,
        "post": dT,
        "public": P,
        "anglophone": anglophone,
        "grade_high": grade_high,
        "age": age,
        "girl": girl,
        "books": books,
        "electricity": electricity,
    }
    for j in range(len(cfg.theta2)):
        rows[f"w{j + 1}"] = W[:, j]
    rows["score_math"] = _outcome(cfg, base, effect_math, P, dT, t, ce, z[:3])
    rows["score_lit"] = _outcome(cfg, base, effect_lit, P, dT, t, ce, z[3:])
    frame = pd.DataFrame(rows, columns=schema_columns(len(cfg.theta2)))
    return PanelDataset(frame, len(cfg.theta2))
