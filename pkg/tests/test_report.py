import csv
import io

import pytest

from decentsim.dgp import DGPConfig, generate_panel
from decentsim.did import fit_main_spec
from decentsim.report import TableLayout, format_cell, format_number, render_table, stars


@pytest.mark.parametrize(
    "estimate, t, expected",
    [
        (10.2, 19.71, ("10.20***", "(19.71)")),
        (0.825, 0.94, ("0.825", "(0.94)")),
        (1.705, 2.12, ("1.705*", "(2.12)")),
        (-16.44, -3.1, ("-16.44**", "(-3.10)")),
    ],
)
def test_format_cell(estimate, t, expected):
    assert format_cell(estimate, t) == expected


@pytest.mark.parametrize(
    "x, expected",
    [(9.9996, "10.00"), (0.99996, "1.000"), (123.456, "123.5"), (0.0123456, "0.0123"), (0.0, "0"),
     (-0.5, "-0.500"), (1234.5, "1234")],
)
def test_format_number(x, expected):
    assert format_number(x) == expected


def test_star_thresholds():
    assert stars(1.95) == ""
    assert stars(1.97) == "*"
    assert stars(2.6) == "**"
    assert stars(3.4) == "***"
    assert stars(float("nan")) == ""


def test_render_table_structure():
    panel = generate_panel(DGPConfig(n_municipalities=20, seed=1))
    fits = [fit_main_spec(panel, o, with_fe=True).fit for o in ("score_math", "score_lit")]
    text, table_csv = render_table(fits, TableLayout(titles=["Math", "Literacy"]))
    lines = text.splitlines()
    assert "Math" in lines[1] and "Literacy" in lines[1]
    assert any(line.startswith("Decentralization effect") for line in lines)
    assert any(line.startswith("School fixed effects") and line.count("Yes") == 2 for line in lines)
    obs = next(line for line in lines if line.startswith("Observations"))
    assert obs.split()[1:] == [str(len(panel))] * 2

    rows = list(csv.DictReader(io.StringIO(table_csv)))
    math_rows = {r["term"]: r for r in rows if r["model"] == "Math"}
    assert float(math_rows["post:public"]["estimate"]) == fits[0].coef("post:public")
    assert int(math_rows["n_obs"]["estimate"]) == len(panel)
    assert "public" not in math_rows  # absorbed by the fixed effect


def test_render_table_title_mismatch():
    panel = generate_panel(DGPConfig(n_municipalities=10, seed=1))
    with pytest.raises(ValueError, match="title"):
        render_table([fit_main_spec(panel).fit], TableLayout(titles=["a", "b"]))
