"""Stylized-facts measurements on price and return series."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft
from scipy import stats as sstats

from .params import ModelError


class InsufficientDataError(ModelError, ValueError):
    pass


class ZeroVarianceError(ModelError, ValueError):
    pass


POWER_LAW_DISCLAIMER = (
    "effective exponent of a finite-size decay; it depends on the model "
    "parameters and the fitted lag range and is not a universal constant"
)


@dataclass(frozen=True)
class SeriesStats:
    n: int
    mean: float
    variance: float
    skewness: float
    excess_kurtosis: float


@dataclass(frozen=True)
class AcfReport:
    lags: np.ndarray
    values: np.ndarray
    noise_band: float
    kind: str = "autocorrelation"

    def outside_band(self, lags=None) -> np.ndarray:
        """Boolean mask of ``lags`` (default: all but lag 0) outside the band."""
        sel = self.lags[1:] if lags is None else np.asarray(lags)
        return np.abs(self.values[sel]) > self.noise_band

    def to_rows(self):
        return [(int(k), float(v), self.noise_band) for k, v in zip(self.lags, self.values)]


def drop_burn_in(series, fraction: float = 0.1) -> np.ndarray:
    """Discard the leading ``fraction`` of a series (warm-up transient)."""
    if not 0.0 <= fraction < 1.0:
        raise ValueError("burn-in fraction must lie in [0, 1)")
    x = np.asarray(series, dtype=float)
    return x[int(math.floor(fraction * x.size)):]


def returns(prices) -> np.ndarray:
    """One-step linear returns p(t) - p(t-1)."""
    p = np.asarray(prices, dtype=float)
    if p.size < 2:
        raise InsufficientDataError("need at least 2 prices")
    return np.diff(p)


def _centered_lagged_sums(x: np.ndarray, max_lag: int) -> np.ndarray:
    # sum_t (x_t - m)(x_{t+k} - m) for k = 0..max_lag
    d = x - x.mean()
    n = d.size
    if max_lag < 64:
        return np.array([np.dot(d[: n - k], d[k:]) for k in range(max_lag + 1)])
    size = sfft.next_fast_len(2 * n - 1, real=True)
    f = sfft.rfft(d, size)
    return sfft.irfft(f * np.conj(f), size)[: max_lag + 1]


def _check_lag(x: np.ndarray, max_lag: int) -> None:
    if max_lag < 0:
        raise ValueError("max_lag must be >= 0")
    if x.size <= max_lag + 1:
        raise InsufficientDataError(f"series of length {x.size} too short for max_lag={max_lag}")


def autocorrelation(series, max_lag: int, z: float = 1.96) -> AcfReport:
    x = np.asarray(series, dtype=float)
    _check_lag(x, max_lag)
    sums = _centered_lagged_sums(x, max_lag)
    if not sums[0] > 0:
        raise ZeroVarianceError("series has zero variance")
    values = sums / sums[0]
    values[0] = 1.0
    return AcfReport(np.arange(max_lag + 1), values, z / math.sqrt(x.size))


def autocovariance(series, max_lag: int, z: float = 1.96) -> AcfReport:
    """Autocovariance with divisor n; lag 0 is the population variance."""
    x = np.asarray(series, dtype=float)
    _check_lag(x, max_lag)
    values = _centered_lagged_sums(x, max_lag) / x.size
    if not np.any(x != x[0]):
        values = np.zeros(max_lag + 1)
    return AcfReport(np.arange(max_lag + 1), values, z * float(values[0]) / math.sqrt(x.size), kind="autocovariance")


def volatility_series(rets, mode: str = "abs", smoothing_window: int = 1) -> np.ndarray:
    """|r| or r^2, optionally averaged over a sliding box of ``smoothing_window``."""
    r = np.asarray(rets, dtype=float)
    if r.size == 0:
        raise InsufficientDataError("empty return series")
    if mode == "abs":
        v = np.abs(r)
    elif mode == "squared":
        v = r * r
    else:
        raise ValueError(f"unknown volatility mode {mode!r}")
    if smoothing_window < 1:
        raise ValueError("smoothing_window must be >= 1")
    if smoothing_window == 1:
        return v
    if smoothing_window > v.size:
        raise InsufficientDataError("smoothing window longer than the series")
    c = np.concatenate(([0.0], np.cumsum(v)))
    return (c[smoothing_window:] - c[:-smoothing_window]) / smoothing_window


def excess_kurtosis(series) -> float:
    x = np.asarray(series, dtype=float)
    if x.size < 4:
        raise InsufficientDataError("need at least 4 observations")
    d = x - x.mean()
    m2 = np.mean(d * d)
    if not m2 > 0:
        raise ZeroVarianceError("series has zero variance")
    m4 = np.mean(d ** 4)
    return float(m4 / (m2 * m2) - 3.0)


def series_stats(series) -> SeriesStats:
    x = np.asarray(series, dtype=float)
    d = x - x.mean()
    m2 = float(np.mean(d * d))
    skew = float(np.mean(d ** 3) / m2 ** 1.5) if m2 > 0 else math.nan
    kurt = excess_kurtosis(x) if m2 > 0 and x.size >= 4 else math.nan
    return SeriesStats(int(x.size), float(x.mean()), m2, skew, kurt)


def hill_tail_index(series, k_fraction: float = 0.05) -> float:
    """Hill estimate of the tail exponent of |series| from its top order statistics."""
    a = np.abs(np.asarray(series, dtype=float))
    k = int(math.floor(a.size * k_fraction))
    if k < 10:
        raise InsufficientDataError(f"only {k} tail observations; need >= 10")
    if k >= a.size:
        raise InsufficientDataError("k_fraction leaves no threshold observation")
    top = -np.partition(-a, k)[: k + 1]
    top.sort()
    threshold = top[0]
    if not threshold > 0:
        raise InsufficientDataError("tail threshold is zero")
    logs = np.log(top[1:] / threshold)
    return float(1.0 / logs.mean())


def volatility_clustering_report(rets, max_lag: int, mode: str = "abs") -> AcfReport:
    """Autocorrelation of the volatility proxy (|r| by default)."""
    return autocorrelation(volatility_series(rets, mode), max_lag)


def decay_lag(report: AcfReport, threshold: float = 0.05) -> int | None:
    """First lag at which the correlation drops below ``threshold``."""
    below = np.flatnonzero(report.values < threshold)
    return int(report.lags[below[0]]) if below.size else None


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    ci_low: float
    ci_high: float
    lag_min: int
    lag_max: int
    disclaimer: str = field(default=POWER_LAW_DISCLAIMER)


def effective_decay_exponent(report: AcfReport, lag_min: int = 1, lag_max: int | None = None, level: float = 0.95) -> PowerLawFit:
    """Fit rho(k) ~ k^(-beta) over positive correlations in [lag_min, lag_max]."""
    lag_max = int(report.lags[-1]) if lag_max is None else lag_max
    sel = (report.lags >= lag_min) & (report.lags <= lag_max) & (report.values > 0)
    if np.count_nonzero(sel) < 3:
        raise InsufficientDataError("fewer than 3 positive correlations in the fit range")
    lx, ly = np.log(report.lags[sel]), np.log(report.values[sel])
    fit = sstats.linregress(lx, ly)
    half = sstats.t.ppf(0.5 + level / 2, lx.size - 2) * fit.stderr
    beta = -fit.slope
    return PowerLawFit(float(beta), float(beta - half), float(beta + half), lag_min, lag_max)


@dataclass(frozen=True)
class ConditionalVarianceRow:
    bin: int
    lower: float
    upper: float
    count: int
    mean_current: float
    mean_next: float
    stderr_next: float


def conditional_variance_diagnostic(rets, n_bins: int = 10) -> list[ConditionalVarianceRow]:
    """Mean |r(t+1)| within quantile bins of |r(t)|.

    A table increasing with the bin shows that large moves follow large moves.
    """
    r = np.asarray(rets, dtype=float)
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    if r.size < 10 * n_bins:
        raise InsufficientDataError(f"need at least {10 * n_bins} returns for {n_bins} bins")
    a = np.abs(r)
    cur, nxt = a[:-1], a[1:]
    edges = np.quantile(cur, np.linspace(0.0, 1.0, n_bins + 1))
    if np.any(np.diff(edges) <= 0):
        raise InsufficientDataError("degenerate quantile bins (too many tied |r| values)")
    which = np.clip(np.searchsorted(edges, cur, side="right") - 1, 0, n_bins - 1)
    rows = []
    for j in range(n_bins):
        m = which == j
        y = nxt[m]
        se = float(y.std(ddof=1) / math.sqrt(y.size)) if y.size > 1 else math.nan
        rows.append(ConditionalVarianceRow(j, float(edges[j]), float(edges[j + 1]), int(y.size),
                                           float(cur[m].mean()), float(y.mean()), se))
    return rows
