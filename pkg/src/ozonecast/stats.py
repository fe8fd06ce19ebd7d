"""Descriptive statistics, Shapiro-Wilk normality test and Spearman correlation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import StatError


@dataclass(frozen=True)
class SummaryRow:
    min: float
    mean: float
    max: float
    sd: float
    skewness: float
    kurtosis: float
    shapiro_w: float | None = None
    shapiro_p: float | None = None


@dataclass(frozen=True)
class CorrelationMatrix:
    labels: tuple[str, ...]
    values: np.ndarray

    def __getitem__(self, pair: tuple[str, str]) -> float:
        a, b = pair
        return float(self.values[self.labels.index(a), self.labels.index(b)])


def _vector(x, min_n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.size < min_n:
        raise StatError(f"need at least {min_n} values, got {x.size}")
    if not np.isfinite(x).all():
        raise StatError("values must be finite (fill gaps first)")
    return x


def central_moments(x) -> tuple[float, float, float]:
    """Biased central moments m2, m3, m4."""
    x = _vector(x, 1)
    d = x - x.mean()
    d2 = d * d
    return float(d2.mean()), float((d2 * d).mean()), float((d2 * d2).mean())


def skewness(x) -> float:
    m2, m3, _ = central_moments(x)
    return m3 / m2**1.5 if m2 > 0 else 0.0


def kurtosis(x) -> float:
    """Excess kurtosis m4/m2^2 - 3."""
    m2, _, m4 = central_moments(x)
    return m4 / m2**2 - 3.0 if m2 > 0 else 0.0


def summary_stats(x) -> SummaryRow:
    x = _vector(x, 2)
    return SummaryRow(
        min=float(x.min()),
        mean=float(x.mean()),
        max=float(x.max()),
        sd=float(x.std(ddof=1)),
        skewness=skewness(x),
        kurtosis=kurtosis(x),
    )


# Royston (1995) polynomial coefficients, ascending powers
_C1 = (0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056)
_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
_C3 = (0.5440, -0.39978, 0.025054, -6.714e-4)
_C4 = (1.3822, -0.77857, 0.062767, -0.0020322)
_C5 = (-1.5861, -0.31082, -0.083751, 0.0038915)
_C6 = (-0.4803, -0.082676, 0.0030302)
_G = (-2.273, 0.459)


def _poly(coefs: Sequence[float], x: float) -> float:
    result = 0.0
    for c in reversed(coefs):
        result = result * x + c
    return result


def shapiro_weights(n: int) -> np.ndarray:
    """Upper-half weights a_1..a_{n//2} (a_1 pairs the extreme order statistics)."""
    if n == 3:
        return np.array([math.sqrt(0.5)])
    half = n // 2
    m = -ndtri((np.arange(1, half + 1) - 0.375) / (n + 0.25))
    summ2 = 2.0 * float(np.sum(m * m))
    ssumm2 = math.sqrt(summ2)
    rsn = 1.0 / math.sqrt(n)
    a = m / ssumm2
    a1 = _poly(_C1, rsn) + m[0] / ssumm2
    if n > 5:
        a2 = _poly(_C2, rsn) + m[1] / ssumm2
        fac = math.sqrt((summ2 - 2 * m[0] ** 2 - 2 * m[1] ** 2) / (1 - 2 * a1**2 - 2 * a2**2))
        a = m / fac
        a[0], a[1] = a1, a2
    else:
        fac = math.sqrt((summ2 - 2 * m[0] ** 2) / (1 - 2 * a1**2))
        a = m / fac
        a[0] = a1
    return a


def shapiro_wilk(x) -> tuple[float, float]:
    """Shapiro-Wilk (W, p) via Royston's approximation; valid for 3 <= n <= 5000."""
    x = np.sort(_vector(x, 3))
    n = x.size
    if n > 5000:
        raise StatError(f"Shapiro-Wilk approximation is valid up to n=5000, got {n}")
    if x[-1] - x[0] <= 0.0:
        raise StatError("zero variance")

    a = shapiro_weights(n)
    half = a.size
    xs = (x - x.mean()) / (x[-1] - x[0])
    numerator = float(np.dot(a, xs[::-1][:half] - xs[:half]))
    ssx = float(np.dot(xs, xs))
    w = min(numerator * numerator / ssx, 1.0)

    if n == 3:
        p = 6.0 / math.pi * (math.asin(math.sqrt(w)) - math.asin(math.sqrt(0.75)))
        return w, max(p, 0.0)

    w1 = 1.0 - w
    if w1 <= 0.0:
        return w, 1.0
    y = math.log(w1)
    if n <= 11:
        gamma = _poly(_G, n)
        if y >= gamma:
            return w, 1e-99
        y = -math.log(gamma - y)
        mu = _poly(_C3, n)
        sigma = math.exp(_poly(_C4, n))
    else:
        ln = math.log(n)
        mu = _poly(_C5, ln)
        sigma = math.exp(_poly(_C6, ln))
    p = float(ndtr(-(y - mu) / sigma))
    return w, p


def midranks(x) -> np.ndarray:
    """1-based ranks with tied values sharing the average of their positions."""
    x = np.asarray(x, dtype=float)
    order = np.argsort(x, kind="stable")
    ranks = np.empty(x.size)
    sx = x[order]
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(x, y) -> float:
    x = _vector(x, 2)
    y = _vector(y, 2)
    if x.size != y.size:
        raise StatError(f"length mismatch: {x.size} vs {y.size}")
    rx = midranks(x)
    ry = midranks(y)
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        raise StatError("zero rank variance")
    rho = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, rho))


def correlation_matrix(data: Mapping[str, np.ndarray], columns: Sequence[str]) -> CorrelationMatrix:
    """Pairwise Spearman matrix; ``data`` maps names to vectors (a table works)."""
    columns = tuple(columns)
    if len(columns) < 2:
        raise StatError("need at least 2 columns")
    k = len(columns)
    values = np.eye(k)
    vectors = [np.asarray(data[c], dtype=float) for c in columns]
    for i in range(k):
        for j in range(i + 1, k):
            values[i, j] = values[j, i] = spearman(vectors[i], vectors[j])
    return CorrelationMatrix(columns, values)


def describe(data: Mapping[str, np.ndarray], columns: Sequence[str]) -> dict[str, SummaryRow]:
    """Summary rows with Shapiro-Wilk fields filled, keyed by column."""
    rows = {}
    for c in columns:
        base = summary_stats(data[c])
        w, p = shapiro_wilk(data[c])
        rows[c] = SummaryRow(**{**base.__dict__, "shapiro_w": w, "shapiro_p": p})
    return rows
