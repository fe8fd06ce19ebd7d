"""Independent reference computations used as test oracles.

Each one takes a deliberately different route from the library code:
explicit loops, normal equations, exhaustive search, direct summation.
"""

import datetime as dt
import math

import numpy as np


def normal_equations(X, y):
    """OLS (weights, intercept) from (A'A) beta = A'y with an explicit ones column."""
    A = np.column_stack([np.ones(len(y)), X])
    beta = np.linalg.solve(A.T @ A, A.T @ y)
    return beta[1:], beta[0]


def knn_brute(Xtr, ytr, x, k):
    """Mean target of the k nearest rows by a full sort on (distance, index)."""
    dists = []
    for i, row in enumerate(Xtr):
        d = sum((float(a) - float(b)) ** 2 for a, b in zip(row, x))
        dists.append((d, i))
    dists.sort()
    return sum(ytr[i] for _, i in dists[:k]) / k


def sse(values):
    if len(values) == 0:
        return 0.0
    m = sum(values) / len(values)
    return sum((v - m) ** 2 for v in values)


def exhaustive_split(X, y, min_leaf=1):
    """Best (feature, threshold, gain) over every feature and midpoint, or None.

    Ties keep the first candidate in (feature, threshold) order.
    """
    X = np.asarray(X, dtype=float)
    y = [float(v) for v in y]
    parent = sse(y)
    best = None
    for j in range(X.shape[1]):
        values = sorted(set(X[:, j]))
        for a, b in zip(values[:-1], values[1:]):
            thr = 0.5 * (a + b)
            left = [y[i] for i in range(len(y)) if X[i, j] <= thr]
            right = [y[i] for i in range(len(y)) if X[i, j] > thr]
            if len(left) < min_leaf or len(right) < min_leaf:
                continue
            gain = parent - sse(left) - sse(right)
            if best is None or gain > best[2] + 1e-9 * max(1.0, parent):
                best = (j, thr, gain)
    if best is None or best[2] <= 1e-9 * max(1.0, parent):
        return None
    return best


def greedy_tree_predict(X, y, x, depth, min_leaf=1):
    """Prediction of a depth-limited greedy CART tree built by recursion on exhaustive_split."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if depth == 0:
        return float(np.mean(y))
    s = exhaustive_split(X, y, min_leaf)
    if s is None:
        return float(np.mean(y))
    j, thr, _ = s
    mask = X[:, j] <= thr
    side = mask if x[j] <= thr else ~mask
    return greedy_tree_predict(X[side], y[side], x, depth - 1, min_leaf)


def moments(x):
    """(mean, sample sd, skewness g1, excess kurtosis g2) by direct summation."""
    x = [float(v) for v in x]
    n = len(x)
    mean = 0.0
    for v in x:
        mean += v
    mean /= n
    m2 = m3 = m4 = 0.0
    for v in x:
        d = v - mean
        m2 += d * d
        m3 += d * d * d
        m4 += d * d * d * d
    m2 /= n
    m3 /= n
    m4 /= n
    sd = math.sqrt(m2 * n / (n - 1))
    return mean, sd, m3 / m2**1.5, m4 / m2**2 - 3.0


def midrank_count(x):
    """Rank of each element = (#smaller) + (#equal + 1) / 2, by counting."""
    x = list(x)
    return [sum(1 for b in x if b < a) + (sum(1 for b in x if b == a) + 1) / 2 for a in x]


def pearson(a, b):
    n = len(a)
    ma = sum(a) / n
    mb = sum(b) / n
    sab = sum((p - ma) * (q - mb) for p, q in zip(a, b))
    saa = sum((p - ma) ** 2 for p in a)
    sbb = sum((q - mb) ** 2 for q in b)
    return sab / math.sqrt(saa * sbb)


def spearman_oracle(x, y):
    return pearson(midrank_count(x), midrank_count(y))


def zeller_weekday(d: dt.date) -> int:
    """Day of week by Zeller's congruence, converted to Monday = 0."""
    q, m, y = d.day, d.month, d.year
    if m < 3:
        m += 12
        y -= 1
    k, j = y % 100, y // 100
    h = (q + (13 * (m + 1)) // 5 + k + k // 4 + j // 4 + 5 * j) % 7  # 0 = Saturday
    return (h + 5) % 7


def enet_kkt(X, y, w, b, lam, l1_ratio):
    """Largest violation of the ElasticNet optimality conditions (subgradient form)."""
    n = len(y)
    r = y - X @ w - b
    worst = abs(r.mean())  # intercept stationarity
    for j in range(X.shape[1]):
        g = -(X[:, j] @ r) / n + lam * (1 - l1_ratio) * w[j]
        if w[j] != 0.0:
            worst = max(worst, abs(g + lam * l1_ratio * np.sign(w[j])))
        else:
            worst = max(worst, max(0.0, abs(g) - lam * l1_ratio))
    return worst


def svr_kkt(Kmat, y, beta, b, C, eps):
    """Largest violation of the epsilon-SVR optimality conditions.

    With f = K beta + b and residual e = y - f:
      beta = 0        -> |e| <= eps
      0 < beta < C    -> e = eps          beta = C  -> e >= eps
      -C < beta < 0   -> e = -eps         beta = -C -> e <= -eps
    """
    f = Kmat @ beta + b
    worst = 0.0
    for i, bi in enumerate(beta):
        e = y[i] - f[i]
        if bi == 0.0:
            v = max(0.0, abs(e) - eps)
        elif bi >= C:
            v = max(0.0, eps - e)
        elif bi <= -C:
            v = max(0.0, e + eps)
        elif bi > 0:
            v = abs(e - eps)
        else:
            v = abs(e + eps)
        worst = max(worst, v)
    return worst


def lag1_pairs_corr(x):
    """Pearson correlation of consecutive pairs (x_t, x_{t+1})."""
    x = list(map(float, x))
    return pearson(x[:-1], x[1:])
