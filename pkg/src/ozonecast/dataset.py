"""Daily pollutant/meteorology table: parsing, gap repair, splitting, scaling."""

from __future__ import annotations

import csv
import datetime as dt
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    DuplicateDateError,
    GapBudgetError,
    GapRunError,
    OzoneError,
    ParseError,
    SchemaError,
    SplitError,
)

log = logging.getLogger(__name__)

TARGET = "O3"
PREDICTORS = ("CO", "NO", "NO2", "NOX", "PM10", "PM2.5", "SO2", "RH", "TMP", "WDR", "WSP")
SCHEMA = ("CO", "NO", "NO2", "NOX", "O3", "PM10", "PM2.5", "SO2", "RH", "TMP", "WDR", "WSP")

GAP_TOKENS = frozenset({"", "nan", "na", "null"})
GAP_SENTINEL = -99.0

# observed limits for the RAMA/REDMET extract: runs below 12 registers, < 0.5% gaps
DEFAULT_MAX_RUN = 12
DEFAULT_MAX_FRACTION = 0.005


@dataclass(frozen=True)
class TimeSeriesTable:
    """Dated rows of named numeric columns; NaN marks a gap cell."""

    dates: tuple[dt.date, ...]
    columns: Mapping[str, np.ndarray]

    def __post_init__(self):
        dates = tuple(self.dates)
        for a, b in zip(dates, dates[1:]):
            if not a < b:
                raise ValueError(f"dates must be strictly increasing ({a} !< {b})")
        cols = {}
        for name, values in self.columns.items():
            arr = np.array(values, dtype=float)
            if arr.shape != (len(dates),):
                raise ValueError(f"column {name!r} has shape {arr.shape}, expected ({len(dates)},)")
            arr.flags.writeable = False
            cols[name] = arr
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "columns", cols)

    @property
    def n_rows(self) -> int:
        return len(self.dates)

    @property
    def names(self) -> list[str]:
        return list(self.columns)

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.columns[name]
        except KeyError:
            raise SchemaError(f"unknown column {name!r}") from None

    def gap_mask(self, name: str) -> np.ndarray:
        return np.isnan(self[name])

    def n_gaps(self) -> int:
        return int(sum(np.isnan(v).sum() for v in self.columns.values()))

    def with_columns(self, updates: Mapping[str, np.ndarray]) -> "TimeSeriesTable":
        cols = dict(self.columns)
        cols.update(updates)
        return TimeSeriesTable(self.dates, cols)

    def matrix(self, names: Sequence[str]) -> np.ndarray:
        return np.column_stack([self[n] for n in names]) if names else np.empty((self.n_rows, 0))


def _parse_cell(raw: str, row: int, column: str) -> float:
    token = raw.strip()
    if token.lower() in GAP_TOKENS:
        return math.nan
    try:
        value = float(token)
    except ValueError:
        raise ParseError(row, f"non-numeric value {raw!r} in column {column!r}") from None
    if value == GAP_SENTINEL or math.isnan(value):
        return math.nan
    return value


def parse_csv(
    path: str | Path,
    schema: Sequence[str] = SCHEMA,
    complete_calendar: bool = True,
) -> TimeSeriesTable:
    """Read a daily CSV (ISO date in the first column) into a table.

    Empty cells, ``NaN`` and the ``-99`` sentinel become gaps. Rows are
    sorted by date. With ``complete_calendar`` every missing calendar day
    between the first and last date is inserted as an all-gap row so that
    gap repair sees it.

    Row numbers in errors are 1-based file lines (the header is line 1).
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file, no header row") from None
        if len(header) < 2:
            raise SchemaError(f"{path}: header needs a date column plus data columns")
        missing = [c for c in schema if c not in header[1:]]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}")
        positions = {c: header.index(c) for c in schema}

        records: dict[dt.date, list[float]] = {}
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                day = dt.date.fromisoformat(row[0].strip())
            except ValueError:
                raise ParseError(line_no, f"unparseable date {row[0]!r}") from None
            if day in records:
                raise DuplicateDateError(line_no, day)
            values = []
            for c in schema:
                pos = positions[c]
                values.append(_parse_cell(row[pos] if pos < len(row) else "", line_no, c))
            records[day] = values

    days = sorted(records)
    if complete_calendar and days:
        n_days = (days[-1] - days[0]).days + 1
        if n_days != len(days):
            log.info("%s: inserting %d missing calendar days as gaps", path, n_days - len(days))
            blank = [math.nan] * len(schema)
            days = [days[0] + dt.timedelta(days=i) for i in range(n_days)]
            records = {d: records.get(d, blank) for d in days}

    data = np.array([records[d] for d in days], dtype=float).reshape(len(days), len(schema))
    return TimeSeriesTable(tuple(days), {c: data[:, j] for j, c in enumerate(schema)})


def write_csv(table: TimeSeriesTable, path: str | Path, columns: Sequence[str] | None = None) -> None:
    columns = list(columns or table.names)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", *columns])
        for i, day in enumerate(table.dates):
            cells = []
            for c in columns:
                v = table[c][i]
                cells.append("" if np.isnan(v) else repr(float(v)))
            writer.writerow([day.isoformat(), *cells])


def gap_runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """(start, length) of every run of True values."""
    padded = np.concatenate(([False], np.asarray(mask, dtype=bool), [False]))
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    return [(int(s), int(e - s)) for s, e in zip(edges[::2], edges[1::2])]


def check_gaps(
    table: TimeSeriesTable,
    max_run: int = DEFAULT_MAX_RUN,
    max_fraction: float = DEFAULT_MAX_FRACTION,
) -> list[OzoneError]:
    """Every gap-policy violation in the table, run checks before the budget check per column."""
    if max_run < 1:
        raise ValueError("max_run must be >= 1")
    if not 0.0 < max_fraction <= 1.0:
        raise ValueError("max_fraction must be in (0, 1]")
    problems: list[OzoneError] = []
    n = table.n_rows
    for name, values in table.columns.items():
        mask = np.isnan(values)
        if not mask.any():
            continue
        problems.extend(GapRunError(name, start, length, max_run)
                        for start, length in gap_runs(mask) if length > max_run)
        fraction = mask.sum() / n
        if fraction > max_fraction or mask.all():
            problems.append(GapBudgetError(name, float(fraction), max_fraction))
    return problems


def fill_gaps(
    table: TimeSeriesTable,
    max_run: int = DEFAULT_MAX_RUN,
    max_fraction: float = DEFAULT_MAX_FRACTION,
) -> TimeSeriesTable:
    """Repair gaps: linear interpolation inside, nearest observed value at the edges.

    Every column is validated first: no run may exceed ``max_run`` cells and
    the gap fraction may not exceed ``max_fraction``. The first violation found
    is raised; ``check_gaps`` lists them all.
    """
    problems = check_gaps(table, max_run, max_fraction)
    if problems:
        raise problems[0]

    n = table.n_rows
    idx = np.arange(n)
    repaired = {}
    for name, values in table.columns.items():
        mask = np.isnan(values)
        if not mask.any():
            repaired[name] = values
            continue
        observed = ~mask
        # np.interp clamps outside the observed range, which is the nearest-value edge rule
        filled = values.copy()
        filled[mask] = np.interp(idx[mask], idx[observed], values[observed])
        repaired[name] = filled
    return TimeSeriesTable(table.dates, repaired)


@dataclass(frozen=True)
class SplitSpec:
    mode: str = "chronological"
    train_fraction: float = 0.8
    seed: int = 0

    def __post_init__(self):
        aliases = {"chrono": "chronological", "random": "seeded-random"}
        object.__setattr__(self, "mode", aliases.get(self.mode, self.mode))
        if self.mode not in ("chronological", "seeded-random"):
            raise SplitError(f"unknown split mode {self.mode!r}")
        if not 0.0 < self.train_fraction < 1.0:
            raise SplitError(f"train_fraction must be in (0, 1), got {self.train_fraction}")


def split(table_or_n: TimeSeriesTable | int, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    """Return sorted (train, test) row indices."""
    n = table_or_n if isinstance(table_or_n, int) else table_or_n.n_rows
    # guard against 0.7 * 10 = 7.000000000000001
    n_train = math.ceil(spec.train_fraction * n - 1e-9)
    if n_train < 2 or n - n_train < 2:
        raise SplitError(f"split of {n} rows at {spec.train_fraction} leaves {n_train}/{n - n_train}")
    if spec.mode == "chronological":
        return np.arange(n_train), np.arange(n_train, n)
    perm = np.random.default_rng(spec.seed).permutation(n)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


@dataclass(frozen=True)
class Scaler:
    columns: tuple[str, ...]
    mean: np.ndarray
    sd: np.ndarray
    degenerate: np.ndarray = field(repr=False)

    def _index(self, columns: Sequence[str]) -> list[int]:
        lookup = {c: i for i, c in enumerate(columns)}
        try:
            return [lookup[c] for c in self.columns]
        except KeyError as exc:
            raise SchemaError(f"scaler column {exc.args[0]!r} not in input") from None

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        safe = np.where(self.degenerate, 1.0, self.sd)
        Z = (X - self.mean) / safe
        Z[:, self.degenerate] = 0.0
        return Z

    def inverse(self, Z: np.ndarray) -> np.ndarray:
        return np.asarray(Z, dtype=float) * self.sd + self.mean


def _as_matrix(data, columns: Sequence[str], names: Sequence[str] | None) -> np.ndarray:
    if isinstance(data, TimeSeriesTable):
        return data.matrix(columns)
    X = np.asarray(data, dtype=float)
    if X.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    if names is None:
        if X.shape[1] != len(columns):
            raise SchemaError(f"matrix has {X.shape[1]} columns, scaler expects {len(columns)}")
        return X
    lookup = {c: i for i, c in enumerate(names)}
    missing = [c for c in columns if c not in lookup]
    if missing:
        raise SchemaError(f"unknown columns {missing}")
    return X[:, [lookup[c] for c in columns]]


def fit_scaler(data, train_idx, columns: Sequence[str], names: Sequence[str] | None = None) -> Scaler:
    """Per-column mean and sample SD over the training rows only.

    ``data`` is a :class:`TimeSeriesTable` or a matrix whose column labels are
    ``names`` (defaults to ``columns``).
    """
    columns = tuple(columns)
    X = _as_matrix(data, columns, names)[np.asarray(train_idx)]
    if X.shape[0] < 2:
        raise ValueError("fit_scaler needs at least 2 training rows")
    mean = X.mean(axis=0)
    sd = X.std(axis=0, ddof=1)
    degenerate = sd == 0.0
    if degenerate.any():
        log.warning("degenerate (zero-SD) columns: %s", [c for c, d in zip(columns, degenerate) if d])
    return Scaler(columns, mean, sd, degenerate)


def apply_scaler(scaler: Scaler, data, names: Sequence[str] | None = None) -> np.ndarray:
    """z = (x - mean) / sd per cell, in the scaler's column order; degenerate columns map to 0."""
    if isinstance(data, TimeSeriesTable):
        missing = [c for c in scaler.columns if c not in data.columns]
        if missing:
            raise SchemaError(f"unknown columns {missing}")
    return scaler.transform(_as_matrix(data, scaler.columns, names))
