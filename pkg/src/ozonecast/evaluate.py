"""Metrics, the stacking ensemble, the twelve-model roster and the benchmark runner."""

from __future__ import annotations

import ast
import csv
import hashlib
import inspect
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .dataset import SplitSpec, TimeSeriesTable
from .errors import FitError, MetricError, OzoneError
from .features import ApproachSpec, build_approach
from .instance import fit_knn, fit_svr
from .linear import LinearModel, fit_elastic_net, fit_ols
from .neural import init_mlp, train_mlp
from .trees import fit_bagging, fit_boosted, fit_random_forest


def _pair(actual, predicted):
    a = np.asarray(actual, dtype=float).ravel()
    p = np.asarray(predicted, dtype=float).ravel()
    if a.size != p.size:
        raise MetricError(f"length mismatch: {a.size} actual vs {p.size} predicted")
    if a.size == 0:
        raise MetricError("empty vectors")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(p))):
        raise MetricError("non-finite values")
    return a, p


def mse(actual, predicted) -> float:
    a, p = _pair(actual, predicted)
    d = a - p
    return float(np.mean(d * d))


def r2(actual, predicted) -> float:
    """1 - SS_res / SS_tot, with SS_tot about the mean of ``actual``."""
    a, p = _pair(actual, predicted)
    c = a - a.mean()
    ss_tot = float(c @ c)
    if ss_tot == 0.0:
        raise MetricError("actual values have zero variance")
    d = a - p
    return 1.0 - float(d @ d) / ss_tot


# ---------------------------------------------------------------- roster


@dataclass(frozen=True)
class ModelSpec:
    key: str
    label: str
    fit: Callable  # fit(X, y, seed, **params) -> object with .predict(X)
    params: Mapping = field(default_factory=dict)

    def with_params(self, **overrides) -> "ModelSpec":
        allowed = self.tunable()
        for name in overrides:
            if name not in allowed:
                raise KeyError(f"model {self.key!r} has no parameter {name!r}; "
                               f"choose from {sorted(allowed)}")
        return ModelSpec(self.key, self.label, self.fit, {**self.params, **overrides})

    def tunable(self) -> set:
        sig = inspect.signature(self.fit)
        names = {p for p in sig.parameters if p not in ("X", "y", "seed")}
        return names | set(self.params)

    def train(self, X, y, seed: int):
        return self.fit(X, y, seed, **self.params)


def _ols(X, y, seed):
    return fit_ols(X, y)


def _rf(X, y, seed, n_trees=200, mtry=None, max_depth=None, min_samples_leaf=2):
    return fit_random_forest(X, y, n_trees=n_trees, mtry=mtry, max_depth=max_depth,
                             min_samples_leaf=min_samples_leaf, seed=seed)


def _boosted(variant):
    def fit(X, y, seed, n_rounds=300, learning_rate=0.1, max_depth=-1, min_samples_leaf=None,
            lambda_reg=1.0, n_bins=64, num_leaves=None):
        return fit_boosted(X, y, variant, n_rounds=n_rounds, learning_rate=learning_rate,
                           max_depth=max_depth, min_samples_leaf=min_samples_leaf,
                           lambda_reg=lambda_reg, n_bins=n_bins, num_leaves=num_leaves, seed=seed)
    return fit


def _svr(X, y, seed, C=1.0, epsilon=0.1, kernel="rbf", gamma="scale", tol=1e-3, max_iter=1_000_000):
    return fit_svr(X, y, C=C, epsilon=epsilon, kernel=kernel, gamma=gamma, tol=tol, max_iter=max_iter)


def _knn(X, y, seed, k=5):
    return fit_knn(X, y, k=k)


def _enet(X, y, seed, lam=1.0, l1_ratio=0.5, tol=1e-6, max_iter=10000):
    return fit_elastic_net(X, y, lam=lam, l1_ratio=l1_ratio, tol=tol, max_iter=max_iter)


def _bagging(X, y, seed, n_estimators=10, max_depth=None, min_samples_leaf=2):
    return fit_bagging(X, y, n_estimators=n_estimators, max_depth=max_depth,
                       min_samples_leaf=min_samples_leaf, seed=seed)


def _mlp(X, y, seed, hidden=100, activation="relu", epochs=200, batch_size=32, learning_rate=1e-3):
    X = np.asarray(X, dtype=float)
    model = init_mlp(X.shape[1], hidden, activation, seed)
    model, _ = train_mlp(model, X, y, epochs=epochs, batch_size=batch_size,
                         learning_rate=learning_rate)
    return model


DEFAULT_STACK_BASES = ("ols", "rf", "gb", "knn")


def _stacking(X, y, seed, bases=DEFAULT_STACK_BASES, k=5):
    if isinstance(bases, str):
        bases = tuple(b for b in bases.replace("+", ",").split(",") if b)
    return fit_stacking(X, y, [ROSTER[b] for b in bases], k, seed)


# report display order
ROSTER: dict[str, ModelSpec] = {
    spec.key: spec
    for spec in (
        ModelSpec("ols", "Linear Regression", _ols),
        ModelSpec("rf", "Random Forest", _rf),
        ModelSpec("gb", "Gradient Boosting", _boosted("classic")),
        ModelSpec("svr", "Support Vector Regression", _svr),
        ModelSpec("knn", "K-Nearest Neighbors", _knn),
        ModelSpec("enet", "ElasticNet", _enet),
        ModelSpec("gb2", "Second-order Boosting", _boosted("second-order")),
        ModelSpec("hgb", "Histogram Boosting", _boosted("histogram")),
        ModelSpec("bagging", "Bagging", _bagging),
        ModelSpec("stacking", "Stacking", _stacking),
        ModelSpec("mlp_tanh", "MLP (150, tanh)", _mlp, {"hidden": 150, "activation": "tanh"}),
        ModelSpec("mlp_relu", "MLP (100, relu)", _mlp, {"hidden": 100, "activation": "relu"}),
    )
}
ROSTER_ORDER = tuple(ROSTER)


def model_seed(seed: int, key: str) -> int:
    """Independent seed per roster entry, fixed by the master seed and the entry's position.

    Entries outside the roster are keyed by a stable hash of their name.
    """
    if key in ROSTER_ORDER:
        slot = ROSTER_ORDER.index(key)
    else:
        slot = int.from_bytes(hashlib.sha256(key.encode()).digest()[:4], "little") + len(ROSTER_ORDER)
    return int(np.random.SeedSequence([seed, slot]).generate_state(1)[0])


def parse_value(text: str):
    """Python literal if it parses as one, otherwise the raw string."""
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def build_roster(keys: Optional[Sequence[str]] = None,
                 overrides: Optional[Mapping[str, Mapping]] = None) -> list[ModelSpec]:
    keys = list(ROSTER_ORDER if keys is None else keys)
    unknown = [k for k in keys if k not in ROSTER]
    if unknown:
        raise KeyError(f"unknown model(s) {unknown}; choose from {list(ROSTER_ORDER)}")
    overrides = dict(overrides or {})
    for k in overrides:
        if k not in ROSTER:
            raise KeyError(f"override for unknown model {k!r}")
    # roster order regardless of the order requested
    keys = sorted(set(keys), key=ROSTER_ORDER.index)
    return [ROSTER[k].with_params(**overrides.get(k, {})) for k in keys]


# ---------------------------------------------------------------- stacking


@dataclass(frozen=True)
class StackingModel:
    bases: tuple  # ModelSpec per base model
    fitted: tuple  # base models refit on all rows
    meta: LinearModel
    k: int
    seed: int
    folds: np.ndarray  # fold id of each training row
    oof: np.ndarray  # (n, m) out-of-fold predictions
    oof_source: np.ndarray  # (n, m) fold whose held-out model produced each entry
    instance_folds: tuple  # folds each held-out instance was trained on

    def predict(self, X) -> np.ndarray:
        Z = np.column_stack([m.predict(X) for m in self.fitted])
        return self.meta.predict(Z)


def kfold_assignment(n: int, k: int, seed: int) -> np.ndarray:
    """Fold id per row: a seeded permutation cut into k near-equal contiguous blocks."""
    perm = np.random.default_rng(seed).permutation(n)
    folds = np.empty(n, dtype=int)
    for f, block in enumerate(np.array_split(perm, k)):
        folds[block] = f
    return folds


def fit_stacking(X, y, bases: Sequence[ModelSpec], k: int = 5, seed: int = 0) -> StackingModel:
    """K-fold out-of-fold base predictions feed an OLS meta model; bases then refit on all rows."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if k < 2:
        raise FitError("stacking needs k >= 2 folds")
    if len(bases) < 2:
        raise FitError("stacking needs at least 2 base models")
    n = y.size
    if n < k:
        raise FitError(f"{n} rows cannot fill {k} folds")
    seeds = np.random.SeedSequence(seed).generate_state(len(bases) + 1)
    folds = kfold_assignment(n, k, int(seeds[-1]))
    oof = np.empty((n, len(bases)))
    source = np.full((n, len(bases)), -1)
    instance_folds = tuple(tuple(g for g in range(k) if g != f) for f in range(k))
    for j, spec in enumerate(bases):
        for f in range(k):
            hold = folds == f
            model = spec.train(X[~hold], y[~hold], int(seeds[j]))
            oof[hold, j] = model.predict(X[hold])
            source[hold, j] = f
    meta = fit_ols(oof, y)
    fitted = tuple(spec.train(X, y, int(seeds[j])) for j, spec in enumerate(bases))
    return StackingModel(tuple(bases), fitted, meta, k, seed, folds, oof, source, instance_folds)


# ---------------------------------------------------------------- benchmark


@dataclass(frozen=True)
class ReportRow:
    key: str
    label: str
    mse: float = float("nan")
    r2: float = float("nan")
    error: Optional[str] = None


@dataclass(frozen=True)
class ScatterData:
    label: str
    actual: np.ndarray
    predicted: np.ndarray
    identity: tuple  # ((lo, lo), (hi, hi))


@dataclass
class BenchmarkReport:
    approach: int
    rows: list
    fingerprint: str
    seed: int
    scatter: dict = field(default_factory=dict, repr=False)  # key -> ScatterData

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model", "mse", "r2"])
        for row in self.rows:
            if row.error is None:
                w.writerow([row.label, repr(row.mse), repr(row.r2)])
            else:
                w.writerow([row.label, "", ""])
        return buf.getvalue()

    def to_markdown(self) -> str:
        lines = [
            f"Approach {self.approach} (seed {self.seed}, config {self.fingerprint})",
            "",
            "| Model | MSE | R² |",
            "|---|---:|---:|",
        ]
        for row in self.rows:
            if row.error is None:
                lines.append(f"| {row.label} | {row.mse:.6f} | {row.r2:.6f} |")
            else:
                lines.append(f"| {row.label} | failed: {row.error} | |")
        return "\n".join(lines) + "\n"


def export_scatter(actual, predicted, label: str) -> ScatterData:
    a, p = _pair(actual, predicted)
    lo = float(min(a.min(), p.min()))
    hi = float(max(a.max(), p.max()))
    return ScatterData(label, a.copy(), p.copy(), ((lo, lo), (hi, hi)))


def fingerprint(*parts) -> str:
    return hashlib.sha256(repr(parts).encode()).hexdigest()[:16]


def _run_one(spec: ModelSpec, train, test, seed: int):
    try:
        model = spec.train(train.X, train.y, model_seed(seed, spec.key))
        pred = np.asarray(model.predict(test.X), dtype=float)
        if not np.all(np.isfinite(pred)):
            raise FitError("non-finite predictions")
        row = ReportRow(spec.key, spec.label, mse(test.y, pred), r2(test.y, pred))
        return row, export_scatter(test.y, pred, spec.label)
    except (OzoneError, ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        return ReportRow(spec.key, spec.label, error=f"{type(exc).__name__}: {exc}"), None


def run_benchmark(
    table: TimeSeriesTable,
    approach: ApproachSpec,
    roster: Optional[Sequence[ModelSpec]] = None,
    split_spec: SplitSpec = SplitSpec(),
    seed: int = 0,
    jobs: int = 1,
) -> BenchmarkReport:
    """Fit every roster entry on one approach's training rows and score it on the test rows.

    A failing model becomes an error row; the rest of the run continues.
    Results do not depend on ``jobs``: every entry has its own derived seed and
    rows are assembled in roster order.
    """
    roster = build_roster() if roster is None else list(roster)
    train, test, _ = build_approach(table, approach, split_spec, seed)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda s: _run_one(s, train, test, seed), roster))
    else:
        results = [_run_one(s, train, test, seed) for s in roster]
    fp = fingerprint(approach, split_spec, seed, [(s.key, sorted(s.params.items())) for s in roster],
                     train.names, train.X.shape, test.X.shape)
    rows = [r for r, _ in results]
    scatter = {r.key: sc for r, sc in results if sc is not None}
    return BenchmarkReport(approach.id, rows, fp, seed, scatter)
