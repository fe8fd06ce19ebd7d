"""Ordinary least squares and ElasticNet (cyclic coordinate descent)."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import ConvergenceWarning, FitError, PredictError


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray
    intercept: float
    kind: str = "OLS"
    lam: float = 0.0
    l1_ratio: float = 0.0
    tol: float = 0.0
    max_iter: int = 0
    n_iter: int = 0
    converged: bool = True
    objective_trace: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)

    def predict(self, X) -> np.ndarray:
        return predict_linear(self, X)


def _design(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.size == 0:
        raise FitError(f"empty or non-2-D design matrix, shape {X.shape}")
    if X.shape[0] != y.shape[0]:
        raise FitError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
    return X, y


def fit_ols(X, y) -> LinearModel:
    """Least squares with intercept.

    Solved on centered data by a column-pivoted complete orthogonal
    factorization (LAPACK gelsy), which returns the minimum-norm solution
    when X is rank deficient. Singular values below eps * max(n, p) of the
    largest count as zero, so exactly collinear columns share their weight.
    """
    X, y = _design(X, y)
    if X.shape[0] < 2:
        raise FitError("need at least 2 rows")
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    cond = np.finfo(float).eps * max(X.shape)
    w, *_ = linalg.lstsq(X - x_mean, y - y_mean, cond=cond, lapack_driver="gelsy")
    return LinearModel(weights=w, intercept=float(y_mean - x_mean @ w))


def _soft(z: float, gamma: float) -> float:
    if z > gamma:
        return z - gamma
    if z < -gamma:
        return z + gamma
    return 0.0


def elastic_net_objective(X, y, w, b, lam, l1_ratio) -> float:
    r = y - X @ w - b
    return float(
        r @ r / (2 * len(y))
        + lam * (l1_ratio * np.abs(w).sum() + 0.5 * (1 - l1_ratio) * (w @ w))
    )


def lambda_max(X, y, l1_ratio: float) -> float:
    """Smallest lam that zeroes every weight."""
    X, y = _design(X, y)
    return _lambda_max(X - X.mean(axis=0), y - y.mean(), l1_ratio)


def _lambda_max(Xc: np.ndarray, yc: np.ndarray, l1_ratio: float) -> float:
    if l1_ratio <= 0:
        return np.inf
    with np.errstate(over="ignore"):  # a vanishing l1 share has no finite threshold
        return float(np.max(np.abs(Xc.T @ yc)) / (len(yc) * l1_ratio))


def fit_elastic_net(
    X,
    y,
    lam: float = 1.0,
    l1_ratio: float = 0.5,
    tol: float = 1e-6,
    max_iter: int = 10000,
) -> LinearModel:
    """Minimize (1/2n)||y - Xw - b||^2 + lam*(a*||w||_1 + (1-a)/2*||w||^2).

    Cyclic coordinate descent in column order; stops when the largest
    coefficient change in a sweep drops below ``tol``. The intercept is
    unpenalized and recovered from the column means.
    """
    X, y = _design(X, y)
    if lam < 0:
        raise ValueError("lam must be >= 0")
    if not 0.0 <= l1_ratio <= 1.0:
        raise ValueError("l1_ratio must be in [0, 1]")
    n, p = X.shape
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    sd = X.std(axis=0)
    if np.any(np.abs(x_mean) > 1e-6 * np.maximum(sd, 1.0)) or np.any(np.abs(sd - 1.0) > 0.1):
        warnings.warn("ElasticNet expects standardized features", stacklevel=2)
    Xc = X - x_mean
    yc = y - y_mean
    # w = 0 satisfies the optimality conditions exactly; skip the sweep so
    # roundoff in the coordinate updates cannot leave ~1e-16 weights behind
    null = lam >= _lambda_max(Xc, yc, l1_ratio)
    Xc = np.asfortranarray(Xc)

    l1 = n * lam * l1_ratio
    l2 = n * lam * (1.0 - l1_ratio)
    col_sq = np.einsum("ij,ij->j", Xc, Xc)
    w = np.zeros(p)
    r = yc.copy()
    trace = [elastic_net_objective(Xc, yc, w, 0.0, lam, l1_ratio)]
    converged = False
    n_iter = 0
    for n_iter in range(1, 0 if null else max_iter + 1):
        max_change = 0.0
        for j in range(p):
            if col_sq[j] == 0.0:
                continue
            xj = Xc[:, j]
            old = w[j]
            rho = xj @ r + col_sq[j] * old
            new = _soft(rho, l1) / (col_sq[j] + l2)
            if new != old:
                r -= (new - old) * xj
                w[j] = new
                max_change = max(max_change, abs(new - old))
        trace.append(elastic_net_objective(Xc, yc, w, 0.0, lam, l1_ratio))
        if max_change < tol:
            converged = True
            break
    converged = converged or null
    if not converged:
        warnings.warn(f"ElasticNet did not converge in {max_iter} sweeps", ConvergenceWarning,
                      stacklevel=2)
    return LinearModel(
        weights=w,
        intercept=float(y_mean - x_mean @ w),
        kind="ElasticNet",
        lam=float(lam),
        l1_ratio=float(l1_ratio),
        tol=float(tol),
        max_iter=int(max_iter),
        n_iter=n_iter,
        converged=converged,
        objective_trace=np.array(trace),
    )


def predict_linear(model: LinearModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.weights.size:
        raise PredictError(f"expected {model.weights.size} features, got {X.shape[1]}")
    # row-wise reduction keeps batch and single-row results bit-identical
    return (X * model.weights).sum(axis=1) + model.intercept
