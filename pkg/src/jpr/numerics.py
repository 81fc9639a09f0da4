"""Chi-square distribution and small dense Cholesky kernels."""

from __future__ import annotations

import math

import numpy as np

from .errors import (
    NotPositiveDefiniteError,
    NotSymmetricError,
    ProbabilityOutOfRangeError,
    operation,
)

_EPS = 1e-15
_MAX_ITER = 10_000


def _gamma_series(a: float, x: float) -> float:
    # P(a, x) by its power series; converges fast for x < a + 1.
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cont_frac(a: float, x: float) -> float:
    # Q(a, x) by the modified Lentz continued fraction; for x >= a + 1.
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def regularized_gamma_p(a: float, x: float) -> float:
    """Lower regularized incomplete gamma function P(a, x)."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x <= 0:
        return 0.0
    if x < a + 1.0:
        return _gamma_series(a, x)
    return 1.0 - _gamma_cont_frac(a, x)


def regularized_gamma_q(a: float, x: float) -> float:
    """Upper regularized incomplete gamma function Q(a, x) = 1 - P(a, x)."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x <= 0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_series(a, x)
    return _gamma_cont_frac(a, x)


def chi_square_cdf(x: float, df: float) -> float:
    return regularized_gamma_p(df / 2.0, x / 2.0)


def chi_square_sf(x: float, df: float) -> float:
    """Survival function; accurate in the far right tail, used for p-values."""
    return regularized_gamma_q(df / 2.0, x / 2.0)


def _chi_square_pdf(x: float, df: float) -> float:
    k = df / 2.0
    if x <= 0:
        return 0.0
    return math.exp((k - 1.0) * math.log(x) - x / 2.0 - k * math.log(2.0) - math.lgamma(k))


@operation("series.chi_square_quantile")
def chi_square_quantile(df: int, p: float, tol: float = 1e-12) -> float:
    """Inverse chi-square CDF.

    Brackets the root by doubling, then runs safeguarded Newton steps on
    ``P(df/2, x/2) - p``; any Newton step leaving the bracket falls back to
    bisection, so convergence is guaranteed.
    """
    if not 0.0 < p < 1.0:
        raise ProbabilityOutOfRangeError(f"p must lie in (0, 1), got {p}")
    if df <= 0:
        raise ValueError("df must be positive")
    lo, hi = 0.0, max(1.0, float(df))
    while chi_square_cdf(hi, df) < p:
        lo, hi = hi, hi * 2.0
    x = 0.5 * (lo + hi)
    upper = p > 0.5
    q = 1.0 - p
    for _ in range(2000):
        # CDF(x) - p, evaluated through the survival function in the upper
        # tail where the CDF itself has no digits left.
        f = q - chi_square_sf(x, df) if upper else chi_square_cdf(x, df) - p
        if f == 0.0:
            return x
        if f < 0:
            lo = x
        else:
            hi = x
        dens = _chi_square_pdf(x, df)
        nxt = x - f / dens if dens > 0 else 0.5 * (lo + hi)
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        # Relative tolerance, so tiny quantiles (p near 0) are still resolved.
        scale = max(abs(x), 1e-300)
        if abs(nxt - x) <= tol * scale or hi - lo <= tol * scale:
            return nxt
        x = nxt
    return x


@operation("series.cholesky")
def cholesky(matrix) -> np.ndarray:
    """Lower-triangular P with P @ P.T == matrix (Cholesky-Banachiewicz)."""
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NotSymmetricError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NotSymmetricError("matrix has non-finite entries")
    if np.max(np.abs(a - a.T), initial=0.0) > 1e-10:
        raise NotSymmetricError("matrix is not symmetric within 1e-10")
    n = a.shape[0]
    low = np.zeros_like(a)
    for i in range(n):
        for j in range(i + 1):
            s = a[i, j] - np.dot(low[i, :j], low[j, :j])
            if i == j:
                if s <= 0.0:
                    raise NotPositiveDefiniteError(f"non-positive pivot {s:.3g} at row {i}")
                low[i, i] = math.sqrt(s)
            else:
                low[i, j] = s / low[j, j]
    return low


def solve_lower(low: np.ndarray, b) -> np.ndarray:
    """Forward substitution for a lower-triangular system."""
    b = np.asarray(b, dtype=float)
    x = np.zeros_like(b)
    for i in range(low.shape[0]):
        x[i] = (b[i] - np.dot(low[i, :i], x[:i])) / low[i, i]
    return x
