"""Pupil-period panel container and its column schema."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

ID_COLUMNS = ("pupil_id", "school_id", "municipality_id", "period")
FLAG_COLUMNS = ("post", "public", "anglophone", "grade_high")
PUPIL_COLUMNS = ("age", "girl", "books", "electricity")
OUTCOME_COLUMNS = ("score_math", "score_lit")
SCHOOL_CONSTANT = ("public", "anglophone", "municipality_id")

INT_COLUMNS = ID_COLUMNS + FLAG_COLUMNS + ("age", "girl", "books", "electricity")


def w_names(k: int) -> tuple[str, ...]:
    return tuple(f"w{j + 1}" for j in range(k))


def schema_columns(n_w: int) -> list[str]:
    """Column order of a panel with ``n_w`` school covariates."""
    return [*ID_COLUMNS, *FLAG_COLUMNS, *PUPIL_COLUMNS, *w_names(n_w), *OUTCOME_COLUMNS]


@dataclass
class PanelDataset:
    """One row per pupil-period, columns in :func:`schema_columns` order.

    ``check()`` enforces the structural invariants: school attributes are
    time-invariant, outcomes are finite and every (period, public) cell of the
    difference-in-differences design is populated.
    """

    frame: pd.DataFrame
    n_w: int = 0

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, check: bool = True) -> "PanelDataset":
        n_w = sum(1 for c in frame.columns if c.startswith("w") and c[1:].isdigit())
        ds = cls(frame[schema_columns(n_w)].reset_index(drop=True), n_w)
        if check:
            ds.check()
        return ds

    @property
    def columns(self) -> list[str]:
        return list(self.frame.columns)

    @property
    def w_columns(self) -> tuple[str, ...]:
        return w_names(self.n_w)

    @property
    def n_schools(self) -> int:
        return int(self.frame["school_id"].nunique())

    @property
    def periods(self) -> list[int]:
        return sorted(int(p) for p in self.frame["period"].unique())

    def __len__(self) -> int:
        return len(self.frame)

    def roles(self) -> dict[str, str]:
        roles = {c: "covariate" for c in self.columns}
        roles.update({c: "id" for c in ("pupil_id", "municipality_id")})
        roles.update(school_id="cluster", period="period", post="period", public="treatment")
        roles.update({c: "outcome" for c in OUTCOME_COLUMNS})
        return roles

    def check(self) -> None:
        df = self.frame
        missing = [c for c in schema_columns(self.n_w) if c not in df.columns]
        if missing:
            raise ValueError(f"panel is missing column(s): {', '.join(missing)}")
        if len(df) == 0:
            return
        for col in OUTCOME_COLUMNS:
            if not np.all(np.isfinite(df[col].to_numpy(dtype=float))):
                raise ValueError(f"non-finite values in {col}")
        varying = df.groupby("school_id")[list(SCHOOL_CONSTANT)].nunique().max()
        bad = [c for c in SCHOOL_CONSTANT if varying[c] > 1]
        if bad:
            raise ValueError(f"school attribute(s) vary over time: {', '.join(bad)}")
        require_did_cells(df)

    def subset(self, mask) -> "PanelDataset":
        return PanelDataset(self.frame.loc[np.asarray(mask, dtype=bool)].reset_index(drop=True), self.n_w)


def require_did_cells(df: pd.DataFrame, post: str = "post", treated: str = "public") -> None:
    """Raise if any (post, treated) cell of the 2x2 design is empty."""
    counts = df.groupby([df[post].astype(int), df[treated].astype(int)]).size()
    empty = [f"{post}={p}, {treated}={t}" for p in (0, 1) for t in (0, 1) if counts.get((p, t), 0) == 0]
    if empty:
        raise ValueError(f"empty difference-in-differences cell(s): {'; '.join(empty)}")
