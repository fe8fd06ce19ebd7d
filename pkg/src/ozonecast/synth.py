"""Seeded synthetic daily dataset with the real table's schema and known structure.

The target is built as

    O3_t = mean + seasonal(doy) + weekday(dow) + sum_k b_k u_k,t
           + g * (u_TMP,t * u_RH,t - E[u_TMP u_RH]) + z_t,
    z_t  = phi * z_{t-1} + sigma * e_t,

where u_k are the signal predictors standardized with their population
moments. TMP and RH carry their own annual cycles; every other predictor
is drawn independently, and seven of them never enter the target. With the
innovations e_t held fixed, ``phi`` is solved so that the sample lag-1
autocorrelation of the generated target equals the configured value (short
series that cannot reach it fall back to matching the expected value).
"""

from __future__ import annotations

import datetime as dt
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.signal import lfilter

from .dataset import PREDICTORS, SCHEMA, TARGET, TimeSeriesTable

SIGNAL = ("TMP", "PM2.5", "RH", "NO")

# (mean, sd) in the units of the real data
MOMENTS = {
    "CO": (0.481, 0.205),
    "NO": (14.712, 8.857),
    "NO2": (23.030, 6.754),
    "NOX": (37.996, 14.795),
    "PM10": (41.892, 16.047),
    "PM2.5": (21.327, 8.796),
    "SO2": (3.689, 3.490),
    "RH": (54.997, 13.425),
    "TMP": (16.684, 2.251),
    "WDR": (181.283, 21.723),
    "WSP": (2.096, 0.437),
}
TARGET_MEAN = 30.486

# day of year of the annual peak, and the fraction of variance that is seasonal
CYCLES = {"TMP": (130.0, 0.6), "RH": (240.0, 0.5)}
TARGET_PEAK = 120.0


@dataclass(frozen=True)
class SynthConfig:
    n: int = 1200
    seed: int = 0
    start: dt.date = dt.date(2015, 1, 1)
    lag1: float = 0.7
    seasonal_amplitude: float = 5.0
    weekday_effect: tuple[float, ...] = (-1.5, -1.0, -0.5, 0.0, 0.5, 1.5, 3.0)
    effects: dict = field(default_factory=lambda: {"TMP": 3.0, "PM2.5": 2.5, "RH": -2.5, "NO": -2.5})
    interaction: tuple[str, str] = ("TMP", "RH")
    interaction_strength: float = 3.5
    noise_sd: float = 4.0

    def __post_init__(self):
        if self.n < 10:
            raise ValueError("n must be >= 10")
        if not -1.0 < self.lag1 < 1.0:
            raise ValueError("lag1 must be in (-1, 1)")
        if len(self.weekday_effect) != 7:
            raise ValueError("weekday_effect needs 7 entries, Monday first")


def _lag1_autocov(x: np.ndarray) -> tuple[float, float]:
    d = x - x.mean()
    return float(d[1:] @ d[:-1] / d.size), float(d @ d / d.size)


def lag1_autocorrelation(x) -> float:
    """Sample lag-1 autocorrelation with the usual biased (1/n) autocovariances."""
    c1, c0 = _lag1_autocov(np.asarray(x, dtype=float))
    return c1 / c0


def _cycle(doy: np.ndarray, peak: float) -> np.ndarray:
    return np.cos(2.0 * np.pi * (doy - peak) / 365.25)


def _ar1(e: np.ndarray, phi: float) -> np.ndarray:
    """AR(1) path driven by e, started from the stationary distribution."""
    drive = e.copy()
    drive[0] /= np.sqrt(1.0 - phi * phi)
    return lfilter([1.0], [1.0, -phi], drive)


def _solve_phi(deterministic: np.ndarray, e: np.ndarray, target: float) -> float:
    """phi such that deterministic + AR(1)(e, phi) has sample lag-1 autocorrelation target.

    The realized curve need not be monotone in phi, so a grid locates the first
    bracket. Short series may never reach the target; phi then matches the
    expected autocorrelation instead, with a warning.
    """

    def realized(phi):
        return lag1_autocorrelation(deterministic + _ar1(e, phi)) - target

    grid = np.linspace(-0.999, 0.999, 41)
    values = [realized(phi) for phi in grid]
    for lo, hi, vlo, vhi in zip(grid, grid[1:], values, values[1:]):
        if vlo == 0.0:
            return float(lo)
        if vlo * vhi < 0:
            return brentq(realized, lo, hi, xtol=1e-12)

    c1, c0 = _lag1_autocov(deterministic)
    noise_var = float(e @ e / e.size)

    def expected(phi):
        vz = noise_var / (1.0 - phi * phi)
        return (c1 + phi * vz) / (c0 + vz) - target

    if expected(grid[0]) * expected(grid[-1]) > 0:
        raise ValueError(f"lag-1 autocorrelation {target} is not reachable with these effects")
    warnings.warn(f"series of {e.size} rows cannot realize lag-1 autocorrelation {target}; "
                  "matching its expected value instead", stacklevel=3)
    return brentq(expected, grid[0], grid[-1], xtol=1e-12)


def generate(config: SynthConfig = SynthConfig()) -> TimeSeriesTable:
    rng = np.random.default_rng(config.seed)
    n = config.n
    dates = tuple(config.start + dt.timedelta(days=i) for i in range(n))
    doy = np.array([d.timetuple().tm_yday for d in dates], dtype=float)
    dow = np.array([d.weekday() for d in dates])

    columns: dict[str, np.ndarray] = {}
    standardized: dict[str, np.ndarray] = {}
    for name in PREDICTORS:
        mean, sd = MOMENTS[name]
        if name in CYCLES:
            peak, share = CYCLES[name]
            season = np.sqrt(2.0 * share) * _cycle(doy, peak)
            u = season + np.sqrt(1.0 - share) * rng.standard_normal(n)
            columns[name] = mean + sd * u
        elif name == "WDR":
            u = rng.standard_normal(n)
            columns[name] = mean + sd * u
        else:
            # positive, right-skewed pollutant with the requested moments
            s2 = np.log1p((sd / mean) ** 2)
            columns[name] = np.exp(np.log(mean) - 0.5 * s2 + np.sqrt(s2) * rng.standard_normal(n))
            u = (columns[name] - mean) / sd
        standardized[name] = u

    a, b = config.interaction
    # E[u_a u_b] over a whole number of years is the product of the two cycles' overlap
    cross = 0.0
    if a in CYCLES and b in CYCLES:
        (pa, sa), (pb, sb) = CYCLES[a], CYCLES[b]
        cross = np.sqrt(sa * sb) * np.cos(2.0 * np.pi * (pa - pb) / 365.25)

    weekday = np.asarray(config.weekday_effect, dtype=float)
    weekday = weekday - weekday.mean()
    deterministic = (
        config.seasonal_amplitude * _cycle(doy, TARGET_PEAK)
        + weekday[dow]
        + sum(b_k * standardized[k] for k, b_k in config.effects.items())
        + config.interaction_strength * (standardized[a] * standardized[b] - cross)
    )
    e = config.noise_sd * rng.standard_normal(n)
    phi = _solve_phi(deterministic, e, config.lag1)
    columns[TARGET] = TARGET_MEAN + deterministic + _ar1(e, phi)
    return TimeSeriesTable(dates, {name: columns[name] for name in SCHEMA})
