"""Additive moving-average seasonal-trend decomposition."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatchError, PeriodInvalidError, SeriesTooShortError, operation
from .series import as_values


@dataclass(frozen=True)
class Decomposition:
    trend: np.ndarray
    seasonal: np.ndarray
    remainder: np.ndarray
    period: int

    @property
    def phase_means(self) -> np.ndarray:
        """One full period of the seasonal component, phase 0 first."""
        return self.seasonal[: self.period]

    def __len__(self) -> int:
        return self.trend.size


def _centered_moving_average(x: np.ndarray, m: int) -> tuple[np.ndarray, int]:
    """Centered MA of window m (2xm for even m); returns (values, offset).

    ``values[i]`` is the trend estimate at index ``offset + i``.
    """
    if m % 2:
        w = np.full(m, 1.0 / m)
    else:
        w = np.concatenate([[0.5], np.ones(m - 1), [0.5]]) / m
    return np.convolve(x, w, mode="valid"), w.size // 2


def _line_through(idx: np.ndarray, vals: np.ndarray, at: np.ndarray) -> np.ndarray:
    slope, intercept = np.polyfit(idx, vals, 1)
    return intercept + slope * at


@operation("decompose.classical_decompose")
def classical_decompose(series, period: int) -> Decomposition:
    """Split ``series`` into trend + seasonal + remainder.

    The trend is a centered moving average over one period, filled out to
    both ends by a straight line fitted to the ``period`` nearest trend
    values. Seasonal effects are per-phase means of the detrended interior,
    shifted to sum to zero and tiled; the remainder absorbs the rest, so the
    three components reconstruct the input exactly.
    """
    x = as_values(series)
    m = int(period)
    if m < 2:
        raise PeriodInvalidError(f"period must be at least 2, got {period}")
    if x.size < 2 * m:
        raise SeriesTooShortError(f"need at least 2*period = {2 * m} observations, got {x.size}")
    ma, off = _centered_moving_average(x, m)
    trend = np.empty_like(x)
    trend[off : off + ma.size] = ma
    # Ends: straight-line extrapolation from the nearest `m` fitted values.
    nfit = min(m, ma.size)
    if off:
        head_idx = np.arange(off, off + nfit)
        trend[:off] = _line_through(head_idx, ma[:nfit], np.arange(off))
        tail_idx = np.arange(off + ma.size - nfit, off + ma.size)
        trend[off + ma.size :] = _line_through(tail_idx, ma[-nfit:], np.arange(off + ma.size, x.size))

    detrended = x[off : off + ma.size] - ma
    phases = np.arange(off, off + ma.size) % m
    means = np.array([detrended[phases == j].mean() for j in range(m)])
    means -= means.mean()
    seasonal = means[np.arange(x.size) % m]
    remainder = x - trend - seasonal
    return Decomposition(trend=trend, seasonal=seasonal, remainder=remainder, period=m)


def extend_trend(trend: np.ndarray, extension: int, slope_window: int) -> np.ndarray:
    """Continue ``trend`` for ``extension`` steps along its recent slope."""
    if extension == 0:
        return trend.copy()
    w = min(max(int(slope_window), 2), trend.size)
    idx = np.arange(trend.size - w, trend.size)
    slope = np.polyfit(idx, trend[-w:], 1)[0]
    future = trend[-1] + slope * np.arange(1, extension + 1)
    return np.concatenate([trend, future])


@operation("decompose.recompose")
def recompose(
    decomposition: Decomposition,
    new_remainder,
    extension: int = 0,
    trend_slope_window: int | None = None,
) -> np.ndarray:
    """Rebuild a series of length ``T + extension`` around ``new_remainder``.

    Past the end of the data the trend is continued on a straight line
    (least-squares slope over the last ``trend_slope_window`` trend points,
    anchored at the final trend value) and the seasonal pattern repeats.
    """
    rem = np.asarray(new_remainder, dtype=float).ravel()
    total = len(decomposition) + int(extension)
    if rem.size != total:
        raise LengthMismatchError(f"remainder has length {rem.size}, expected {total}")
    window = decomposition.period if trend_slope_window is None else trend_slope_window
    trend = extend_trend(decomposition.trend, int(extension), window)
    seasonal = decomposition.phase_means[np.arange(total) % decomposition.period]
    return trend + seasonal + rem
