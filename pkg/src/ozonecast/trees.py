"""CART regression trees, random forest, bagging and gradient boosting.

Three boosting variants share one engine:

* ``classic``       first-order boosting, trees fit to residuals, mean leaves
* ``second-order``  gradient/hessian statistics with L2-regularized leaves
                    (the XGBoost recipe)
* ``histogram``     second-order statistics on quantile-binned features,
                    best-first (leaf-wise) growth under a leaf budget
                    (the LightGBM recipe)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _tree_kernels as K
from .errors import PredictError

MIN_GAIN_REL = 1e-12

VARIANTS = ("classic", "second-order", "histogram")


@dataclass(frozen=True)
class RegressionTree:
    feature: np.ndarray  # -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    gain: np.ndarray
    n_features: int

    @property
    def node_count(self) -> int:
        return self.feature.size

    @property
    def n_leaves(self) -> int:
        return int((self.feature < 0).sum())

    @property
    def depth(self) -> int:
        depth = np.zeros(self.node_count, dtype=int)
        for node in range(self.node_count):
            if self.feature[node] >= 0:
                depth[self.left[node]] = depth[self.right[node]] = depth[node] + 1
        return int(depth.max())

    def _check(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise PredictError(f"expected {self.n_features} features, got shape {X.shape}")
        return X

    def predict(self, X) -> np.ndarray:
        X = self._check(X)
        return K.predict_tree(X, self.feature, self.threshold, self.left, self.right, self.value)

    def apply(self, X) -> np.ndarray:
        X = self._check(X)
        return K.apply_tree(X, self.feature, self.threshold, self.left, self.right)


def _tree_from(result, p: int) -> tuple[RegressionTree, np.ndarray]:
    feat, thr, left, right, value, count, gain, importance = result
    return RegressionTree(feat, thr, left, right, value, count, gain, p), importance


def presort(X: np.ndarray) -> np.ndarray:
    """(p, n) row indices sorted by each feature; stable so equal values keep row order."""
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T.astype(np.int64))


def _depth_arg(max_depth: Optional[int]) -> int:
    return -1 if max_depth is None else int(max_depth)


def grow_tree(
    X,
    y=None,
    *,
    grad=None,
    hess=None,
    lam: float = 0.0,
    sample_weight=None,
    max_depth: Optional[int] = None,
    min_samples_leaf: int = 1,
    mtry: Optional[int] = None,
    seed: int = 0,
    _presorted: Optional[np.ndarray] = None,
) -> RegressionTree:
    """Grow one tree depth-first with exact split search.

    Pass ``y`` for a classic tree (leaf = weighted mean target) or ``grad``
    (and optionally ``hess``, default ones) for a second-order tree with
    leaf weight -G/(H+lam).
    """
    X = np.ascontiguousarray(X, dtype=float)
    n, p = X.shape
    if n == 0:
        raise ValueError("cannot grow a tree on zero rows")
    w = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    if grad is None:
        t = w * np.asarray(y, dtype=float)
        h = w.copy()
    else:
        h = np.ones(n) if hess is None else np.asarray(hess, dtype=float).copy()
        t = -np.asarray(grad, dtype=float) * w
        h = h * w
    order = _presorted if _presorted is not None else presort(X)
    order = K.active_order(order, w)
    tree, _ = _tree_from(
        K.grow_exact(X, order, t, h, w, float(lam), _depth_arg(max_depth), float(min_samples_leaf),
                     p if mtry is None else int(mtry), int(seed), MIN_GAIN_REL),
        p,
    )
    return tree


def best_split(X, y, min_samples_leaf: int = 1):
    """Best variance-reduction split as (feature, threshold, gain), or None."""
    X = np.ascontiguousarray(X, dtype=float)
    if X.shape[0] < 2 * min_samples_leaf:
        return None
    tree = grow_tree(X, y, max_depth=1, min_samples_leaf=min_samples_leaf)
    if tree.feature[0] < 0:
        return None
    return int(tree.feature[0]), float(tree.threshold[0]), float(tree.gain[0])


@dataclass(frozen=True)
class ForestModel:
    trees: list
    tree_seeds: tuple
    mtry: int
    importances: np.ndarray
    n_features: int

    def predict(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise PredictError(f"expected {self.n_features} features, got shape {X.shape}")
        total = np.zeros(X.shape[0])
        for tree in self.trees:
            total += tree.predict(X)
        return total / len(self.trees)

    def member_predictions(self, X) -> np.ndarray:
        return np.stack([tree.predict(X) for tree in self.trees])


def fit_random_forest(
    X,
    y,
    n_trees: int = 200,
    mtry: Optional[int] = None,
    max_depth: Optional[int] = None,
    min_samples_leaf: int = 2,
    seed: int = 0,
    bootstrap: bool = True,
) -> ForestModel:
    """Bootstrap forest; ``mtry`` defaults to ceil(p/3) features per split.

    Importances are the per-feature split gains (weighted SSE reductions)
    summed over the whole forest and normalized to one.
    """
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    X = np.ascontiguousarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    mtry = max(1, math.ceil(p / 3)) if mtry is None else max(1, min(int(mtry), p))
    order = presort(X)
    children = np.random.SeedSequence(seed).spawn(n_trees)
    trees, seeds = [], []
    total = np.zeros(p)
    for child in children:
        rng = np.random.default_rng(child)
        if bootstrap:
            w = np.bincount(rng.integers(0, n, size=n), minlength=n).astype(float)
        else:
            w = np.ones(n)
        tree_seed = int(rng.integers(0, 2**63 - 1))
        active = K.active_order(order, w)
        tree, imp = _tree_from(
            K.grow_exact(X, active, w * y, w, w, 0.0, _depth_arg(max_depth), float(min_samples_leaf),
                         mtry, tree_seed, MIN_GAIN_REL),
            p,
        )
        trees.append(tree)
        seeds.append(tree_seed)
        total += imp
    s = total.sum()
    importances = total / s if s > 0 else np.zeros(p)
    return ForestModel(trees, tuple(seeds), mtry, importances, p)


def fit_bagging(
    X,
    y,
    n_estimators: int = 10,
    max_depth: Optional[int] = None,
    min_samples_leaf: int = 2,
    seed: int = 0,
) -> ForestModel:
    """Bootstrap-aggregated full-feature trees (a forest with mtry = p)."""
    p = np.asarray(X).shape[1]
    return fit_random_forest(X, y, n_trees=n_estimators, mtry=p, max_depth=max_depth,
                             min_samples_leaf=min_samples_leaf, seed=seed)


def make_bins(X, n_bins: int) -> tuple[np.ndarray, np.ndarray]:
    """Quantile cut points per feature, snapped to midpoints between observed values.

    A feature with at most ``n_bins`` distinct values gets one bin per value.
    Returns (cuts padded with +inf to shape (p, n_bins-1), bins per feature).
    """
    if n_bins < 2:
        raise ValueError("n_bins must be >= 2")
    X = np.asarray(X, dtype=float)
    p = X.shape[1]
    cuts = np.full((p, n_bins - 1), np.inf)
    counts = np.ones(p, dtype=np.int64)
    probs = np.arange(1, n_bins) / n_bins
    for f in range(p):
        u = np.unique(X[:, f])
        if u.size < 2:
            continue
        lo, hi = u[:-1], u[1:]
        mids = np.where(0.5 * (lo + hi) < hi, 0.5 * (lo + hi), lo)
        if u.size <= n_bins:
            c = mids
        else:
            q = np.quantile(X[:, f], probs)
            idx = np.clip(np.searchsorted(u, q, side="right") - 1, 0, u.size - 2)
            c = np.unique(mids[idx])
        cuts[f, : c.size] = c
        counts[f] = c.size + 1
    return cuts, counts


@dataclass(frozen=True)
class BoostedModel:
    base_score: float
    trees: list
    learning_rate: float
    variant: str
    lambda_reg: float
    n_bins: int
    n_features: int
    train_loss: np.ndarray = field(repr=False)

    def predict(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise PredictError(f"expected {self.n_features} features, got shape {X.shape}")
        out = np.full(X.shape[0], self.base_score)
        for tree in self.trees:
            out += self.learning_rate * tree.predict(X)
        return out

    def staged_predict(self, X):
        X = np.ascontiguousarray(X, dtype=float)
        out = np.full(X.shape[0], self.base_score)
        yield out.copy()
        for tree in self.trees:
            out += self.learning_rate * tree.predict(X)
            yield out.copy()


_VARIANT_DEFAULTS = {
    "classic": dict(max_depth=3, min_samples_leaf=1, num_leaves=None),
    "second-order": dict(max_depth=3, min_samples_leaf=1, num_leaves=None),
    "histogram": dict(max_depth=None, min_samples_leaf=20, num_leaves=31),
}


def fit_boosted(
    X,
    y,
    variant: str = "classic",
    n_rounds: int = 300,
    learning_rate: float = 0.1,
    max_depth: Optional[int] = -1,
    min_samples_leaf: Optional[int] = None,
    lambda_reg: float = 1.0,
    n_bins: int = 64,
    num_leaves: Optional[int] = None,
    seed: int = 0,
) -> BoostedModel:
    """Squared-error gradient boosting.

    ``max_depth=-1`` and ``None`` arguments take the variant's defaults:
    depth 3 for the exact variants; unlimited depth, 31 leaves and 20 rows
    per leaf for the histogram variant. ``lambda_reg`` is ignored by the
    classic variant. No step is random, so ``seed`` only fixes the contract.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    if n_rounds < 0:
        raise ValueError("n_rounds must be >= 0")
    if not 0.0 < learning_rate <= 1.0:
        raise ValueError("learning_rate must be in (0, 1]")
    defaults = _VARIANT_DEFAULTS[variant]
    if max_depth == -1:
        max_depth = defaults["max_depth"]
    if min_samples_leaf is None:
        min_samples_leaf = defaults["min_samples_leaf"]
    if num_leaves is None:
        num_leaves = defaults["num_leaves"]

    X = np.ascontiguousarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    base = float(y.mean())
    F = np.full(n, base)
    ones = np.ones(n)
    lam = 0.0 if variant == "classic" else float(lambda_reg)

    if variant == "histogram":
        cuts, counts = make_bins(X, n_bins)
        B = K.bin_matrix(X, cuts, counts)
    else:
        order = presort(X)

    trees = []
    losses = [float(np.mean((y - F) ** 2))]
    for _ in range(n_rounds):
        residual = y - F  # = -gradient of 1/2 (F - y)^2; hessian is 1
        if variant == "histogram":
            result = K.grow_leafwise(B, cuts, counts, residual, ones, lam, int(num_leaves),
                                     _depth_arg(max_depth), int(min_samples_leaf), MIN_GAIN_REL)
        else:
            result = K.grow_exact(X, order.copy(), residual, ones, ones, lam, _depth_arg(max_depth),
                                  float(min_samples_leaf), p, 0, MIN_GAIN_REL)
        tree, _ = _tree_from(result, p)
        trees.append(tree)
        F += learning_rate * tree.predict(X)
        losses.append(float(np.mean((y - F) ** 2)))
    return BoostedModel(base, trees, float(learning_rate), variant, lam, int(n_bins), p,
                        np.array(losses))


def predict_ensemble(model, X) -> np.ndarray:
    return model.predict(X)
