"""The four feature regimes: raw predictors, temporal + interactions, selected subset, lags."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional, Sequence

import numpy as np

from .dataset import PREDICTORS, TARGET, Scaler, SplitSpec, TimeSeriesTable, fit_scaler, split
from .errors import FeatureError
from .trees import fit_random_forest

TEMPORAL = ("year", "month", "day", "day_of_week")
DEFAULT_LAGS = (1, 3)


@dataclass(frozen=True)
class FeatureSet:
    names: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray
    row_dates: tuple[dt.date, ...]

    def __post_init__(self):
        if self.X.shape != (len(self.row_dates), len(self.names)):
            raise FeatureError(f"X shape {self.X.shape} does not match "
                               f"{len(self.row_dates)} rows x {len(self.names)} names")
        if self.y.shape != (len(self.row_dates),):
            raise FeatureError("y must have one entry per row")
        if TARGET in self.names:
            raise FeatureError("the contemporaneous target may not be a feature")

    @property
    def n_rows(self) -> int:
        return len(self.row_dates)

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.names.index(name)]


@dataclass(frozen=True)
class ApproachSpec:
    """One of the four regimes.

    1: raw predictors; 2: + temporal + pairwise interactions;
    3: top_k selected predictors (+ temporal unless disabled);
    4: selected predictors + temporal + target lags.
    """

    id: int
    selected_features: Optional[tuple[str, ...]] = None
    lags: Optional[tuple[int, ...]] = None
    top_k: int = 4
    temporal_with_selection: bool = True
    forest_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.id not in (1, 2, 3, 4):
            raise FeatureError(f"approach must be 1-4, got {self.id}")
        if self.selected_features is not None:
            object.__setattr__(self, "selected_features", tuple(self.selected_features))
        lags = self.lags
        if self.id == 4 and lags is None:
            lags = DEFAULT_LAGS
        if lags is not None:
            lags = tuple(sorted(set(int(k) for k in lags)))
            if self.id == 4 and not lags:
                raise FeatureError("approach 4 needs at least one lag")
            if any(k < 1 for k in lags):
                raise FeatureError(f"lags must be positive, got {lags}")
        object.__setattr__(self, "lags", lags)
        if self.top_k < 1:
            raise FeatureError("top_k must be >= 1")


def temporal_features(dates: Sequence[dt.date]) -> np.ndarray:
    """(year, month, day, day_of_week) per date, Monday = 0."""
    return np.array([(d.year, d.month, d.day, d.weekday()) for d in dates], dtype=float).reshape(-1, 4)


def interaction_features(X, names: Sequence[str]) -> tuple[np.ndarray, list[str]]:
    """Append x_i * x_j for every unordered pair i < j; no squared terms."""
    X = np.asarray(X, dtype=float)
    names = list(names)
    if X.shape[1] < 2:
        raise FeatureError("interactions need at least 2 base columns")
    pairs = list(combinations(range(X.shape[1]), 2))
    products = np.column_stack([X[:, i] * X[:, j] for i, j in pairs])
    return np.hstack([X, products]), names + [f"{names[i]}*{names[j]}" for i, j in pairs]


def lag_features(y, lags: Sequence[int]) -> tuple[np.ndarray, list[str], int]:
    """Columns ``O3_lag_k`` with value y[t-k], for rows t >= max(lags).

    Returns (n - max_lag, len(lags)) matrix, names and the dropped-row count.
    """
    y = np.asarray(y, dtype=float)
    lags = list(lags)
    if not lags:
        raise FeatureError("no lags requested")
    n = y.size
    for k in lags:
        if k <= 0:
            raise FeatureError(f"lag must be >= 1, got {k}")
        if k >= n:
            raise FeatureError(f"lag {k} leaves no rows in a series of {n}")
    drop = max(lags)
    cols = np.column_stack([y[drop - k : n - k] for k in lags])
    return cols, [f"{TARGET}_lag_{k}" for k in lags], drop


def rank_features(train: FeatureSet, forest_params: Optional[dict] = None, seed: int = 0) -> list[tuple[str, float]]:
    """Names ordered by forest impurity-decrease importance (normalized to 1)."""
    params = dict(forest_params or {})
    params.setdefault("seed", seed)
    forest = fit_random_forest(train.X, train.y, **params)
    order = sorted(range(len(train.names)), key=lambda j: (-forest.importances[j], j))
    return [(train.names[j], float(forest.importances[j])) for j in order]


def _raw_features(table: TimeSeriesTable, names: Sequence[str]) -> np.ndarray:
    return table.matrix(names)


def select_features(table: TimeSeriesTable, train_idx, top_k: int = 4,
                    forest_params: Optional[dict] = None, seed: int = 0) -> tuple[str, ...]:
    """Top-k raw predictors by forest importance, fitted on training rows only."""
    train_idx = np.asarray(train_idx)
    fs = FeatureSet(PREDICTORS, _raw_features(table, PREDICTORS)[train_idx], table[TARGET][train_idx],
                    tuple(table.dates[i] for i in train_idx))
    ranking = rank_features(fs, forest_params, seed)
    return tuple(name for name, _ in ranking[:top_k])


def design_matrix(table: TimeSeriesTable, spec: ApproachSpec,
                  selected: Optional[Sequence[str]] = None) -> tuple[np.ndarray, list[str], int]:
    """Unscaled feature matrix over all rows; returns (X, names, rows dropped at the start)."""
    if spec.id in (1, 2):
        names = list(PREDICTORS)
        X = _raw_features(table, names)
        if spec.id == 2:
            X_int, int_names = interaction_features(X, names)
            X = np.hstack([X, temporal_features(table.dates), X_int[:, len(names):]])
            names = names + list(TEMPORAL) + int_names[len(names):]
        drop = 0
    else:
        if selected is None:
            raise FeatureError("approaches 3 and 4 need a selected feature list")
        names = list(selected)
        X = _raw_features(table, names)
        if spec.id == 4 or spec.temporal_with_selection:
            X = np.hstack([X, temporal_features(table.dates)])
            names += list(TEMPORAL)
        drop = 0
    if spec.lags:
        lag_cols, lag_names, drop = lag_features(table[TARGET], spec.lags)
        X = np.hstack([X[drop:], lag_cols])
        names += lag_names
    return X, names, drop


def build_approach(
    table: TimeSeriesTable,
    spec: ApproachSpec,
    split_spec: SplitSpec = SplitSpec(),
    seed: int = 0,
) -> tuple[FeatureSet, FeatureSet, Scaler]:
    """Train/test feature sets for one regime, standardized with train-only statistics.

    The split is drawn over the table's rows; rows lost to lagging are then
    removed from whichever side they fell on, so every approach on the same
    table and split shares one test period.

    Only training rows must be gap-free. Nothing here reads a test-row
    target except through the lag columns of later rows.
    """
    train_idx, test_idx = split(table, split_spec)
    if np.isnan(table.matrix(PREDICTORS + (TARGET,))[train_idx]).any():
        raise FeatureError("training rows have gaps; run fill_gaps first")

    selected = spec.selected_features
    if spec.id in (3, 4) and selected is None:
        selected = select_features(table, train_idx, spec.top_k, spec.forest_params, seed)

    X, names, drop = design_matrix(table, spec, selected)
    y = np.asarray(table[TARGET])[drop:]
    dates = table.dates[drop:]
    train_idx = train_idx[train_idx >= drop] - drop
    test_idx = test_idx[test_idx >= drop] - drop
    if train_idx.size < 2 or test_idx.size < 1:
        raise FeatureError("too few rows left after lagging")
    if np.isnan(X[train_idx]).any():
        raise FeatureError("training features have gaps; run fill_gaps first")

    scaler = fit_scaler(X, train_idx, names)
    Z = scaler.transform(X)
    names = tuple(names)

    def subset(idx):
        return FeatureSet(names, Z[idx], y[idx], tuple(dates[i] for i in idx))

    return subset(train_idx), subset(test_idx), scaler
