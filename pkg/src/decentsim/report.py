"""Regression tables: estimate with stars over the t-statistic in parentheses."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

from scipy.stats import norm

from .estimator import FitResult

STAR_LEVELS = ((0.001, "***"), (0.01, "**"), (0.05, "*"))

DEFAULT_LABELS = {
    "const": "Constant",
    "post": "After Treatment",
    "public": "Public Schools",
    "post:public": "Decentralization effect",
    "post:public:anglophone": "Decent. x Anglophone",
    "post:anglophone": "After x Anglophone",
    "anglophone": "Anglophone",
    "age": "Age",
    "girl": "Dummy for Girl",
    "books": "Books at Home",
    "electricity": "Electricity at Home",
    "grade_high": "Dummy for higher grades",
}

DEFAULT_ORDER = (
    "post", "public", "post:public", "post:public:anglophone", "post:anglophone", "anglophone",
    "age", "girl", "books", "electricity", "grade_high", "const",
)


def stars(t: float) -> str:
    """Significance stars from a two-sided normal p-value."""
    if not math.isfinite(t):
        return ""
    p = 2.0 * norm.sf(abs(t))
    for level, mark in STAR_LEVELS:
        if p < level:
            return mark
    return ""


def format_number(x: float) -> str:
    """Four significant digits at or above one in magnitude, three below."""
    if not math.isfinite(x):
        return str(x)
    if x == 0:
        return "0"

    def fixed(magnitude):
        digits = 4 if magnitude >= 1 else 3
        return f"{x:.{max(0, digits - 1 - math.floor(math.log10(magnitude)))}f}"

    text = fixed(abs(x))
    # rounding can carry into the next power of ten (9.9996 -> 10.000)
    return fixed(abs(float(text))) if float(text) else text


def format_cell(estimate: float, t: float) -> tuple[str, str]:
    return f"{format_number(estimate)}{stars(t)}", f"({t:.2f})"


@dataclass
class TableLayout:
    titles: Sequence[str] | None = None
    labels: dict = field(default_factory=lambda: dict(DEFAULT_LABELS))
    order: Sequence[str] = DEFAULT_ORDER
    label_width: int = 26
    cell_width: int = 14


def _terms(fits, order):
    seen = list(dict.fromkeys(n for f in fits for n in f.names))
    ranked = [n for n in order if n in seen]
    return ranked + [n for n in seen if n not in ranked]


def render_table(fits: Sequence[FitResult], layout: TableLayout | None = None) -> tuple[str, str]:
    """Text table (one column per fit) and a CSV twin with the raw numbers."""
    layout = layout or TableLayout()
    titles = list(layout.titles) if layout.titles else [
        f"{f.outcome}{' FE' if f.fixed_effect else ''}" for f in fits
    ]
    if len(titles) != len(fits):
        raise ValueError("need one title per fit")
    lw, cw = layout.label_width, layout.cell_width

    def line(label, cells):
        return label.ljust(lw) + "".join(c.rjust(cw) for c in cells)

    rule = "=" * (lw + cw * len(fits))
    out = [rule, line("", titles), "-" * len(rule)]
    terms = _terms(fits, layout.order)
    for term in terms:
        est_cells, t_cells = [], []
        for f in fits:
            if term in f.names:
                e, t = format_cell(f.coef(term), f.tstat(term))
            else:
                e = t = ""
            est_cells.append(e)
            t_cells.append(t)
        out.append(line(layout.labels.get(term, term), est_cells))
        out.append(line("", t_cells))
    out.append("-" * len(rule))
    out.append(line("School fixed effects", ["Yes" if f.fixed_effect else "No" for f in fits]))
    out.append(line("Observations", [str(f.n_obs) for f in fits]))
    out.append(line("R-squared", [f"{f.r_squared:.3f}" for f in fits]))
    out.append(rule)
    out.append("t statistics in parentheses. * p<0.05, ** p<0.01, *** p<0.001")
    out.append("Standard errors clustered by school.")
    text = "\n".join(out) + "\n"

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["model", "term", "estimate", "se", "t", "p", "stars"])
    for title, f in zip(titles, fits):
        for j, name in enumerate(f.names):
            t = float(f.t_stats[j])
            writer.writerow(
                [title, name, repr(float(f.params[j])), repr(float(f.se[j])), repr(t),
                 repr(float(f.pvalues[j])), stars(t)]
            )
        writer.writerow([title, "n_obs", f.n_obs, "", "", "", ""])
        writer.writerow([title, "n_clusters", f.n_clusters, "", "", "", ""])
        writer.writerow([title, "r_squared", repr(float(f.r_squared)), "", "", "", ""])
        writer.writerow([title, "fixed_effects", int(bool(f.fixed_effect)), "", "", "", ""])
    return text, buf.getvalue()
