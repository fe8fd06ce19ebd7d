"""K-nearest-neighbour regression and epsilon-insensitive support vector regression."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConvergenceWarning, FitError, PredictError


@dataclass(frozen=True)
class KnnModel:
    X: np.ndarray
    y: np.ndarray
    k: int = 5

    def predict(self, X) -> np.ndarray:
        return knn_predict(self, X)


def fit_knn(X, y, k: int = 5) -> KnnModel:
    X = np.array(X, dtype=float)
    y = np.array(y, dtype=float)
    if X.shape[0] == 0:
        raise FitError("empty training set")
    if not 1 <= k <= X.shape[0]:
        raise FitError(f"k={k} must be in [1, {X.shape[0]}]")
    return KnnModel(X, y, int(k))


def knn_predict(model: KnnModel, X, chunk: int = 32) -> np.ndarray:
    """Mean target of the k nearest training rows (Euclidean).

    Equal distances go to the lower training row index.
    """
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.shape[1] != model.X.shape[1]:
        raise PredictError(f"expected {model.X.shape[1]} features, got {X.shape[1]}")
    if model.k > model.X.shape[0]:
        raise FitError(f"k={model.k} exceeds {model.X.shape[0]} training rows")
    out = np.empty(X.shape[0])
    for s in range(0, X.shape[0], chunk):
        diff = X[s : s + chunk, None, :] - model.X[None, :, :]
        d2 = np.einsum("qnj,qnj->qn", diff, diff)
        nearest = np.argsort(d2, axis=1, kind="stable")[:, : model.k]
        out[s : s + chunk] = model.y[nearest].mean(axis=1)
    return out[0:1] if single else out


# ---------------------------------------------------------------- SVR


def rbf_kernel(A, B, gamma: float) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    d2 = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * A @ B.T
    np.maximum(d2, 0.0, out=d2)
    return np.exp(-gamma * d2)


def linear_kernel(A, B) -> np.ndarray:
    return np.asarray(A, dtype=float) @ np.asarray(B, dtype=float).T


@njit(cache=True, nogil=True)
def _smo(Kmat, y, C, eps, tol, max_iter):
    """SMO on the 2n-variable dual of epsilon-SVR.

    Variables a[0:n] are alpha (sign +1), a[n:2n] alpha* (sign -1).
    minimize 1/2 a'Qa + p'a  s.t.  sum(s*a) = 0, 0 <= a <= C
    with Q_ij = s_i s_j K(i mod n, j mod n), p = eps - s*y.
    Working pair: the maximal violating pair (first-order selection).
    Returns (a, grad, iterations, final gap).
    """
    n = y.size
    m = 2 * n
    a = np.zeros(m)
    s = np.empty(m)
    G = np.empty(m)
    for i in range(n):
        s[i] = 1.0
        s[i + n] = -1.0
        G[i] = eps - y[i]
        G[i + n] = eps + y[i]
    it = 0
    gap = np.inf
    while it < max_iter:
        # i maximizes -s*G over I_up, j minimizes it over I_low
        gmax = -np.inf
        gmin = np.inf
        i = -1
        j = -1
        for t in range(m):
            v = -s[t] * G[t]
            up = (s[t] > 0 and a[t] < C) or (s[t] < 0 and a[t] > 0)
            low = (s[t] > 0 and a[t] > 0) or (s[t] < 0 and a[t] < C)
            if up and v > gmax:
                gmax = v
                i = t
            if low and v < gmin:
                gmin = v
                j = t
        gap = gmax - gmin
        if i < 0 or j < 0 or gap <= tol:
            break
        it += 1
        ii = i % n
        jj = j % n
        Kii = Kmat[ii, ii]
        Kjj = Kmat[jj, jj]
        Kij = Kmat[ii, jj]
        quad = Kii + Kjj - 2.0 * Kij  # identical for both sign patterns
        if quad <= 0.0:
            quad = 1e-12
        ai_old = a[i]
        aj_old = a[j]
        if s[i] != s[j]:
            delta = (-G[i] - G[j]) / quad
            diff = a[i] - a[j]
            a[i] += delta
            a[j] += delta
            if diff > 0.0:
                if a[j] < 0.0:
                    a[j] = 0.0
                    a[i] = diff
            else:
                if a[i] < 0.0:
                    a[i] = 0.0
                    a[j] = -diff
            if diff > 0.0:
                if a[i] > C:
                    a[i] = C
                    a[j] = C - diff
            else:
                if a[j] > C:
                    a[j] = C
                    a[i] = C + diff
        else:
            delta = (G[i] - G[j]) / quad
            total = a[i] + a[j]
            a[i] -= delta
            a[j] += delta
            if total > C:
                if a[i] > C:
                    a[i] = C
                    a[j] = total - C
            else:
                if a[j] < 0.0:
                    a[j] = 0.0
                    a[i] = total
            if total > C:
                if a[j] > C:
                    a[j] = C
                    a[i] = total - C
            else:
                if a[i] < 0.0:
                    a[i] = 0.0
                    a[j] = total
        di = a[i] - ai_old
        dj = a[j] - aj_old
        if di != 0.0 or dj != 0.0:
            si = s[i]
            sj = s[j]
            for t in range(m):
                tt = t % n
                G[t] += s[t] * (si * Kmat[tt, ii] * di + sj * Kmat[tt, jj] * dj)
    return a, G, it, gap


@njit(cache=True)
def _bias(a, G, C, n):
    """Intercept: average over free variables, else midpoint of the feasible interval."""
    m = 2 * n
    total = 0.0
    n_free = 0
    ub = np.inf
    lb = -np.inf
    for t in range(m):
        s = 1.0 if t < n else -1.0
        yg = s * G[t]
        if a[t] >= C:
            if s < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif a[t] <= 0.0:
            if s > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            n_free += 1
            total += yg
    rho = total / n_free if n_free > 0 else 0.5 * (ub + lb)
    return -rho


@dataclass(frozen=True)
class SvrModel:
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha - alpha* for each support vector
    bias: float
    kernel: str
    gamma: float
    C: float
    epsilon: float
    n_iter: int
    gap: float
    converged: bool
    all_dual_coef: np.ndarray  # one entry per training row

    def kernel_matrix(self, A, B) -> np.ndarray:
        if self.kernel == "rbf":
            return rbf_kernel(A, B, self.gamma)
        return linear_kernel(A, B)

    def predict(self, X) -> np.ndarray:
        return svr_predict(self, X)


def default_gamma(X) -> float:
    """1 / (p * Var(X)) over all entries."""
    X = np.asarray(X, dtype=float)
    var = X.var()
    return 1.0 / (X.shape[1] * var) if var > 0 else 1.0


def fit_svr(
    X,
    y,
    C: float = 1.0,
    epsilon: float = 0.1,
    kernel: str = "rbf",
    gamma: float | str = "scale",
    tol: float = 1e-3,
    max_iter: int = 1_000_000,
) -> SvrModel:
    """Epsilon-SVR by SMO; stops once the maximal KKT violation gap is <= ``tol``."""
    if C <= 0:
        raise ValueError("C must be > 0")
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    if kernel not in ("rbf", "linear"):
        raise ValueError(f"unknown kernel {kernel!r}")
    X = np.ascontiguousarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.shape[0] != y.size or y.size == 0:
        raise FitError("X and y must be non-empty with matching rows")
    g = default_gamma(X) if gamma == "scale" else float(gamma)
    Kmat = rbf_kernel(X, X, g) if kernel == "rbf" else linear_kernel(X, X)
    n = y.size
    a, G, it, gap = _smo(np.ascontiguousarray(Kmat), y, float(C), float(epsilon), float(tol),
                         int(max_iter))
    converged = gap <= tol
    if not converged:
        warnings.warn(f"SVR stopped at {it} iterations with KKT gap {gap:.3g}",
                      ConvergenceWarning, stacklevel=2)
    b = _bias(a, G, float(C), n)
    beta = a[:n] - a[n:]
    support = np.flatnonzero(beta != 0.0)
    return SvrModel(
        support_vectors=X[support],
        dual_coef=beta[support],
        bias=float(b),
        kernel=kernel,
        gamma=g,
        C=float(C),
        epsilon=float(epsilon),
        n_iter=int(it),
        gap=float(gap),
        converged=bool(converged),
        all_dual_coef=beta,
    )


def svr_predict(model: SvrModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    p = model.support_vectors.shape[1]
    if X.shape[1] != p:
        raise PredictError(f"expected {p} features, got {X.shape[1]}")
    if model.dual_coef.size == 0:
        return np.full(X.shape[0], model.bias)
    Kx = model.kernel_matrix(X, model.support_vectors)
    return Kx @ model.dual_coef + model.bias
