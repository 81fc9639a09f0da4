"""Series container and the basic kernels everything else builds on.

Functions accept either a :class:`TimeSeries` or any 1-d array-like of
finite floats; correlation sequences and matrices are plain numpy arrays.
Correlation sequences start at lag 1 (``r[0]`` is the lag-1 value).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConstantSeriesError,
    DegreesOfFreedomError,
    EmptySamplesError,
    EmptySeriesError,
    InitialValuesLengthError,
    InvalidSeriesError,
    KOutOfRangeError,
    LagTooLargeError,
    PeriodInvalidError,
    ProbabilityOutOfRangeError,
    SeriesTooShortError,
    operation,
)
from .numerics import chi_square_quantile, chi_square_sf, cholesky  # noqa: F401  (re-export)


@dataclass(frozen=True)
class TimeSeries:
    """Ordered, finite, real-valued observations with an optional period."""

    values: np.ndarray
    period: int | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        if v.size == 0:
            raise EmptySeriesError("series has no observations")
        if not np.all(np.isfinite(v)):
            raise InvalidSeriesError("series contains NaN or infinite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.period is not None:
            m = int(self.period)
            if m < 2 or m > v.size / 2:
                raise PeriodInvalidError(f"period {m} must satisfy 2 <= period <= length/2 = {v.size / 2}")
            object.__setattr__(self, "period", m)

    def __len__(self) -> int:
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def as_values(series) -> np.ndarray:
    """Validated float view of a series or array-like."""
    if isinstance(series, TimeSeries):
        return series.values
    return TimeSeries(series).values


@operation("series.acf")
def acf(series, max_lag: int) -> np.ndarray:
    """Sample autocorrelations r(1..max_lag) with the full-sample denominator."""
    x = as_values(series)
    n = x.size
    if max_lag < 1 or max_lag >= n:
        raise LagTooLargeError(f"max_lag must be in [1, {n - 1}], got {max_lag}")
    dev = x - x.mean()
    denom = float(np.dot(dev, dev))
    if denom <= 0.0 or denom < 1e-300:
        raise ConstantSeriesError("series is constant; autocorrelation undefined")
    r = np.array([np.dot(dev[k:], dev[: n - k]) for k in range(1, max_lag + 1)]) / denom
    return np.clip(r, -1.0, 1.0)


def durbin_levinson(r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Run the Durbin-Levinson recursion on autocorrelations ``r[0] = r(1)``.

    Returns ``(pacf, phi)`` where ``phi`` holds the AR(L) Yule-Walker
    coefficients for ``L = len(r)``.
    """
    r = np.asarray(r, dtype=float)
    L = r.size
    pacf_vals = np.zeros(L)
    phi = np.zeros(0)
    v = 1.0
    for k in range(1, L + 1):
        num = r[k - 1] - np.dot(phi, r[k - 2 :: -1][: k - 1]) if k > 1 else r[0]
        if v <= 0.0:
            raise ConstantSeriesError("prediction error variance collapsed in Durbin-Levinson")
        a = num / v
        phi = np.append(phi - a * phi[::-1], a)
        v *= 1.0 - a * a
        pacf_vals[k - 1] = a
    return pacf_vals, phi


@operation("series.pacf")
def pacf(series, max_lag: int) -> np.ndarray:
    """Partial autocorrelations α(1..max_lag) via Durbin-Levinson over the ACF."""
    r = acf(series, max_lag)
    return np.clip(durbin_levinson(r)[0], -1.0, 1.0)


def ljung_box_statistic(r, n: int) -> float:
    r = np.asarray(r, dtype=float)
    lags = np.arange(1, r.size + 1)
    return float(n * (n + 2) * np.sum(r**2 / (n - lags)))


def box_pierce_statistic(r, n: int) -> float:
    r = np.asarray(r, dtype=float)
    return float(n * np.sum(r**2))


def _portmanteau(residuals, max_lag: int, fitted_params: int, stat_fn) -> tuple[float, float]:
    x = as_values(residuals)
    dof = max_lag - fitted_params
    if max_lag >= x.size:
        raise LagTooLargeError(f"max_lag {max_lag} must be below the residual count {x.size}")
    if dof <= 0:
        raise DegreesOfFreedomError(f"max_lag {max_lag} leaves {dof} degrees of freedom after {fitted_params} fitted parameters")
    r = acf(x, max_lag)
    stat = stat_fn(r, x.size)
    return stat, chi_square_sf(stat, dof)


@operation("series.ljung_box")
def ljung_box(residuals, max_lag: int, fitted_params: int = 0) -> tuple[float, float]:
    """Ljung-Box portmanteau test; returns ``(statistic, p_value)``."""
    return _portmanteau(residuals, max_lag, fitted_params, ljung_box_statistic)


@operation("series.box_pierce")
def box_pierce(residuals, max_lag: int, fitted_params: int = 0) -> tuple[float, float]:
    """Box-Pierce portmanteau test; returns ``(statistic, p_value)``."""
    return _portmanteau(residuals, max_lag, fitted_params, box_pierce_statistic)


@operation("series.empirical_quantile")
def empirical_quantile(samples, p: float) -> float:
    """The ceil(p*B)-th order statistic of B samples, clamped to [1, B]."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise EmptySamplesError("no samples")
    if not np.all(np.isfinite(x)):
        raise EmptySamplesError("samples must be finite")
    if not 0.0 <= p <= 1.0:
        raise ProbabilityOutOfRangeError(f"p must lie in [0, 1], got {p}")
    rank = quantile_rank(p, x.size)
    return float(np.partition(x, rank - 1)[rank - 1])


def quantile_rank(p: float, b: int) -> int:
    """1-based rank used by :func:`empirical_quantile`.

    The product is rounded to 9 decimals first so that e.g. ``0.9 * 10``
    (which is 9.000000000000002 in floating point) lands on rank 9.
    """
    prod = round(p * b, 9)
    return min(max(math.ceil(prod), 1), b)


def _check_k(n: int, k: int) -> None:
    if not 1 <= k <= n:
        raise KOutOfRangeError(f"k must lie in [1, {n}], got {k}")


@operation("series.k_max")
def k_max(values, k: int) -> float:
    """k-th largest element (X_(H-k+1) in ascending order)."""
    x = np.asarray(values, dtype=float).ravel()
    _check_k(x.size, k)
    return float(np.partition(x, x.size - k)[x.size - k])


@operation("series.k_min")
def k_min(values, k: int) -> float:
    """k-th smallest element (X_(k) in ascending order)."""
    x = np.asarray(values, dtype=float).ravel()
    _check_k(x.size, k)
    return float(np.partition(x, k - 1)[k - 1])


@operation("series.difference")
def difference(series, lag: int = 1, order: int = 1) -> np.ndarray:
    """Apply (1 - B^lag) ``order`` times."""
    x = as_values(series)
    if lag < 1 or order < 0:
        raise ValueError("lag must be >= 1 and order >= 0")
    if x.size <= lag * order:
        raise SeriesTooShortError(f"length {x.size} must exceed lag*order = {lag * order}")
    for _ in range(order):
        x = x[lag:] - x[:-lag]
    return x


@operation("series.invert_difference")
def invert_difference(differenced, initial_values, lag: int = 1, order: int = 1) -> np.ndarray:
    """Undo :func:`difference` given the ``lag*order`` dropped leading values."""
    d = np.asarray(differenced, dtype=float).ravel()
    head = np.asarray(initial_values, dtype=float).ravel()
    if head.size != lag * order:
        raise InitialValuesLengthError(f"need {lag * order} initial values, got {head.size}")
    # Rebuild the head of every intermediate differencing stage from the
    # original leading values, then integrate from the innermost stage out.
    stages = [head]
    for _ in range(order):
        prev = stages[-1]
        stages.append(prev[lag:] - prev[:-lag])
    out = d
    for j in range(order, 0, -1):
        out = integrate(stages[j - 1][:lag], out, lag)
    return out


def integrate(history, increments, lag: int) -> np.ndarray:
    """Prepend ``history`` and cumulate lag-``lag`` increments forward.

    ``history`` must hold at least ``lag`` values; the result is
    ``history`` followed by ``x[t] = increments[i] + x[t - lag]``.
    """
    hist = np.asarray(history, dtype=float).ravel()
    inc = np.asarray(increments, dtype=float).ravel()
    if hist.size < lag:
        raise InitialValuesLengthError(f"need at least {lag} history values, got {hist.size}")
    out = np.empty(hist.size + inc.size)
    out[: hist.size] = hist
    for i in range(inc.size):
        t = hist.size + i
        out[t] = inc[i] + out[t - lag]
    return out
