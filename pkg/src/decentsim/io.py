"""Panel CSV files and the key-value run configuration."""
from __future__ import annotations

import configparser
import csv
import dataclasses
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import pandas as pd

from .dgp import DGPConfig
from .panel import INT_COLUMNS, OUTCOME_COLUMNS, PanelDataset, schema_columns

log = logging.getLogger(__name__)

SCHEMA_NAME = "decentsim-panel"
SCHEMA_VERSION = "1.0"
FLAG_SET = {"post", "public", "anglophone", "grade_high", "girl", "books", "electricity"}


class DataError(ValueError):
    """Malformed input data (as opposed to a bad command line)."""


class ConfigError(ValueError):
    pass


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_panel_csv(dataset: PanelDataset, path) -> None:
    """Write ``dataset`` with a schema comment line; floats use shortest round-trip repr."""
    cols = schema_columns(dataset.n_w)
    df = dataset.frame
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {SCHEMA_NAME} schema {SCHEMA_VERSION}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(cols)
        columns = []
        for c in cols:
            values = df[c].to_numpy()
            if c in INT_COLUMNS:
                columns.append([str(int(v)) for v in values])
            else:
                columns.append([repr(float(v)) for v in values])
        writer.writerows(zip(*columns))


def _parse_cell(text: str, column: str, line: int):
    try:
        if column in INT_COLUMNS:
            value = int(text)
            if column in FLAG_SET and value not in (0, 1):
                raise ValueError("expected 0 or 1")
            return value
        value = float(text)
        if not math.isfinite(value):
            raise ValueError("non-finite")
        return value
    except ValueError as exc:
        raise DataError(f"line {line}, column {column!r}: cannot parse {text!r} ({exc})") from None


def read_panel_csv(path) -> PanelDataset:
    """Read a panel CSV, validating every cell.

    A leading ``# decentsim-panel schema X.Y`` line is optional; when present
    its major version must match. Errors name the file line and column.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    line_no = 0
    if lines and lines[0].startswith("#"):
        parts = lines[0].lstrip("#").split()
        if len(parts) != 3 or parts[0] != SCHEMA_NAME or parts[1] != "schema":
            raise DataError(f"line 1: unrecognised schema comment {lines[0]!r}")
        major = parts[2].split(".")[0]
        if major != SCHEMA_VERSION.split(".")[0]:
            raise DataError(f"schema version {parts[2]} is not compatible with {SCHEMA_VERSION}")
        line_no = 1
    if line_no >= len(lines):
        raise DataError(f"{path}: missing header row")
    reader = csv.reader(lines[line_no:])
    header = next(reader)
    n_w = sum(1 for c in header if c.startswith("w") and c[1:].isdigit())
    expected = schema_columns(n_w)
    missing = [c for c in expected if c not in header]
    if missing:
        raise DataError(f"missing mandatory column(s): {', '.join(missing)}")
    index = {c: header.index(c) for c in expected}
    data = {c: [] for c in expected}
    for offset, row in enumerate(reader):
        line = line_no + 2 + offset
        if not row:
            continue
        if len(row) != len(header):
            raise DataError(f"line {line}: expected {len(header)} fields, found {len(row)}")
        for c in expected:
            data[c].append(_parse_cell(row[index[c]].strip(), c, line))
    frame = pd.DataFrame(
        {c: np.asarray(data[c], dtype=np.int64 if c in INT_COLUMNS else float) for c in expected},
        columns=expected,
    )
    dup = frame.duplicated(["pupil_id", "period"])
    if dup.any():
        first = frame.loc[dup].iloc[0]
        raise DataError(
            f"duplicate pupil_id {int(first['pupil_id'])} in period {int(first['period'])}"
        )
    dataset = PanelDataset(frame, n_w)
    if len(frame):
        try:
            dataset.check()
        except ValueError as exc:
            raise DataError(str(exc)) from None
    log.info("read %d rows, %d schools from %s", len(frame), dataset.n_schools, path)
    return dataset


def panels_equal(a: PanelDataset, b: PanelDataset) -> bool:
    if a.n_w != b.n_w or list(a.frame.columns) != list(b.frame.columns):
        return False
    try:
        pd.testing.assert_frame_equal(a.frame, b.frame, check_exact=True)
    except AssertionError:
        return False
    return True


def read_schools_csv(path):
    """Schools for the allocation command: columns ``id, s`` and optional ``e, l0``."""
    from .model import School

    df = pd.read_csv(path, comment="#")
    for c in ("id", "s"):
        if c not in df.columns:
            raise DataError(f"schools file needs column {c!r}")
    schools = []
    for k, row in enumerate(df.itertuples(index=False), start=2):
        try:
            schools.append(
                School(
                    id=int(row.id),
                    s=float(row.s),
                    e=float(getattr(row, "e", 0.0)),
                    l0=float(getattr(row, "l0", 0.0)),
                )
            )
        except (TypeError, ValueError) as exc:
            raise DataError(f"line {k}: {exc}") from None
    if not schools:
        raise DataError("schools file has no rows")
    return schools


# -- configuration -----------------------------------------------------------


@dataclass
class EstimateOptions:
    outcome: str = "score_math"
    fe: bool = True
    cluster: str = "school_id"
    covariates: tuple[str, ...] = ("age", "girl", "books", "electricity", "anglophone", "grade_high")
    grade2_only: bool = False
    r2: str = "within"


@dataclass
class MCOptions:
    reps: int = 500
    jobs: int = 1
    base_seed: int = 0


@dataclass
class ModelOptions:
    distribution: str = "uniform(-1, 1)"
    n_schools: int = 10
    budgets: tuple[float, ...] = (1.0,)
    cap_ratios: tuple[float, ...] = (3.0,)
    n_draws: int = 10000
    seed: int = 0


@dataclass
class RunConfig:
    dgp: DGPConfig = field(default_factory=DGPConfig)
    estimate: EstimateOptions = field(default_factory=EstimateOptions)
    mc: MCOptions = field(default_factory=MCOptions)
    model: ModelOptions = field(default_factory=ModelOptions)


SECTIONS = {"dgp": DGPConfig, "estimate": EstimateOptions, "mc": MCOptions, "model": ModelOptions}


def _convert(raw: str, default, key: str):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError("expected a boolean")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float) or (default is None and key.startswith("lambda")):
            return None if raw.lower() == "none" else float(raw)
        if isinstance(default, tuple):
            items = [p.strip() for p in raw.split(",") if p.strip()]
            if default and isinstance(default[0], str):
                return tuple(items)
            return tuple(float(p) for p in items)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r} ({exc})") from None


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return ", ".join(str(v) if isinstance(v, str) else repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config(text: str) -> RunConfig:
    """Parse INI-style text; every key must be a known field of its section."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    parts = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]; expected one of {sorted(SECTIONS)}")
        cls = SECTIONS[section]
        defaults = {f.name: _field_default(f) for f in dataclasses.fields(cls)}
        values = {}
        for key, raw in parser.items(section):
            if key not in defaults:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            values[key] = _convert(raw, defaults[key], key)
        try:
            parts[section] = cls(**values)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[{section}]: {exc}") from None
    return RunConfig(**parts)


def _field_default(f):
    if f.default is not dataclasses.MISSING:
        return f.default
    return f.default_factory()


def format_config(config: RunConfig) -> str:
    lines = []
    for section in SECTIONS:
        obj = getattr(config, section)
        lines.append(f"[{section}]")
        for f in dataclasses.fields(obj):
            lines.append(f"{f.name} = {_format_value(getattr(obj, f.name))}")
        lines.append("")
    return "\n".join(lines)


def default_config_text() -> str:
    return resources.files("decentsim").joinpath("data/default.ini").read_text(encoding="utf-8")


def load_config(path) -> RunConfig:
    """``"default"`` loads the shipped defaults; anything else is a file path."""
    if path is None or str(path) == "default":
        return parse_config(default_config_text())
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)
