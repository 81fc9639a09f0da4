"""Joint prediction regions over a forecast path.

The central construction is the bootstrap k-FWE region: simulate B
surrogate series of length ``T + H``, refit and forecast on each, and
turn the standardized prediction errors into one multiplier from a
quantile of their k-th largest (or smallest) entry. The same bootstrap
errors also drive the baselines: joint marginals with
Bonferroni/BH/Šidák-corrected levels, the modified Scheffé rectangle and
the nearest-paths envelope.
"""

from __future__ import annotations

import math
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .bootstrap import BootstrapPlan, BootstrapSpec
from .errors import (
    BootstrapSizeWarning,
    DegenerateColumnError,
    HorizonMismatchError,
    InfiniteBoundError,
    KOutOfRangeError,
    LengthMismatchError,
    ProbabilityOutOfRangeError,
    RankDeficientError,
    operation,
)
from .forecasters import ForecasterSpec, PathForecast
from .numerics import chi_square_quantile, cholesky, solve_lower
from .rng import RandomSource
from .series import as_values, empirical_quantile, quantile_rank

SIDES = ("two", "lower", "upper")
METHODS = ("kfwe", "bonferroni", "bh", "sidak", "scheffe", "np")


@dataclass(frozen=True)
class JointRegion:
    lower: np.ndarray
    upper: np.ndarray
    method: str
    alpha: float
    k: int = 1
    sided: str = "two"

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).ravel()
        hi = np.asarray(self.upper, dtype=float).ravel()
        if lo.size != hi.size or lo.size == 0:
            raise LengthMismatchError("lower and upper bounds must have the same nonzero length")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise ValueError("region bounds contain NaN")
        if np.any(lo > hi):
            raise ValueError("lower bound exceeds upper bound")
        if self.sided not in SIDES:
            raise ValueError(f"sided must be one of {SIDES}")
        if self.sided == "two" and not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise InfiniteBoundError("two-sided regions need finite bounds")
        if self.sided == "lower" and not np.all(np.isposinf(hi)):
            raise ValueError("lower-sided regions have +inf upper bounds")
        if self.sided == "upper" and not np.all(np.isneginf(lo)):
            raise ValueError("upper-sided regions have -inf lower bounds")
        if not 1 <= self.k <= lo.size:
            raise KOutOfRangeError(f"k must lie in [1, {lo.size}], got {self.k}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def horizon(self) -> int:
        return self.lower.size

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower


@dataclass(frozen=True)
class SigmaEstimate:
    sigma: np.ndarray
    method: str = "bootstrap_sd"


@dataclass(frozen=True)
class MultiplierSet:
    """Bootstrap quantiles of k-max|S|, k-max S (at 1 - alpha) and k-min S (at alpha)."""

    d_abs_kmax: float
    d_kmax: float
    d_kmin: float


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ProbabilityOutOfRangeError(f"alpha must lie in (0, 1), got {alpha}")


def _matrix(errors, name="errors") -> np.ndarray:
    e = np.asarray(errors, dtype=float)
    if e.ndim != 2:
        raise ValueError(f"{name} must be a B x H matrix")
    if e.shape[0] < 2:
        raise ValueError(f"{name} needs at least 2 rows")
    if not np.all(np.isfinite(e)):
        raise ValueError(f"{name} has non-finite entries")
    return e


# ---------------------------------------------------------------------------
# Sigma and multipliers


@operation("regions.estimate_sigma")
def estimate_sigma(replicate_errors) -> SigmaEstimate:
    """Per-horizon sample sd (divisor B - 1) of bootstrap prediction errors."""
    e = _matrix(replicate_errors)
    sd = e.std(axis=0, ddof=1)
    bad = np.flatnonzero(~(sd > 0))
    if bad.size:
        raise DegenerateColumnError(
            f"zero-variance prediction errors at horizon(s) {', '.join(str(h + 1) for h in bad)}"
        )
    return SigmaEstimate(sd, "bootstrap_sd")


def standardize(replicate_errors, sigma) -> np.ndarray:
    """Divide errors by sigma: one row of sigma per replicate, or one shared row."""
    e = _matrix(replicate_errors)
    s = sigma.sigma if isinstance(sigma, SigmaEstimate) else np.asarray(sigma, dtype=float)
    if np.any(~(s > 0)):
        raise DegenerateColumnError("sigma must be positive")
    return e / s


@operation("regions.kfwe_multipliers")
def kfwe_multipliers(S, k: int, alpha: float) -> MultiplierSet:
    """Multipliers for the k-FWE regions from a B x H standardized error matrix."""
    S = _matrix(S, "standardized errors")
    H = S.shape[1]
    if not 1 <= k <= H:
        raise KOutOfRangeError(f"k must lie in [1, {H}], got {k}")
    _check_alpha(alpha)
    abs_sorted = np.sort(np.abs(S), axis=1)
    srt = np.sort(S, axis=1)
    return MultiplierSet(
        d_abs_kmax=empirical_quantile(abs_sorted[:, H - k], 1.0 - alpha),
        d_kmax=empirical_quantile(srt[:, H - k], 1.0 - alpha),
        d_kmin=empirical_quantile(srt[:, k - 1], alpha),
    )


def kfwe_region_from_errors(
    path: PathForecast | Sequence[float],
    sigma: SigmaEstimate | Sequence[float],
    S,
    k: int,
    alpha: float,
    sided: str = "two",
) -> JointRegion:
    """Assemble the k-FWE region from a path, sigma and standardized errors."""
    point = path.point if isinstance(path, PathForecast) else np.asarray(path, dtype=float)
    sd = sigma.sigma if isinstance(sigma, SigmaEstimate) else np.asarray(sigma, dtype=float)
    if point.size != sd.size or np.shape(S)[1] != point.size:
        raise HorizonMismatchError("path, sigma and error matrix disagree on H")
    mult = kfwe_multipliers(S, k, alpha)
    if sided == "two":
        lo, hi = point - mult.d_abs_kmax * sd, point + mult.d_abs_kmax * sd
    elif sided == "lower":
        lo, hi = point - mult.d_kmax * sd, np.full(point.size, np.inf)
    elif sided == "upper":
        lo, hi = np.full(point.size, -np.inf), point - mult.d_kmin * sd
    else:
        raise ValueError(f"sided must be one of {SIDES}")
    return JointRegion(lo, hi, "kfwe", alpha, k, sided)


# ---------------------------------------------------------------------------
# Bootstrap prediction errors


@dataclass(frozen=True)
class BootstrapErrors:
    """Everything one bootstrap pass yields for a single observed series.

    ``errors[b, h]`` is the replicate forecast minus the replicate's own
    future value; ``forecasts[b, h]`` the replicate forecast itself.
    ``replicate_sigma`` is only set in double-bootstrap mode.
    """

    path: PathForecast
    errors: np.ndarray
    forecasts: np.ndarray
    replicate_sigma: np.ndarray | None = None

    @property
    def B(self) -> int:
        return self.errors.shape[0]

    def paths(self) -> np.ndarray:
        """Bootstrap future paths centred on the real forecast: yhat - u*."""
        return self.path.point[None, :] - self.errors


def _replicate_errors(plan: BootstrapPlan, forecaster: ForecasterSpec, T: int, H: int, gen) -> tuple[np.ndarray, np.ndarray, object]:
    y = plan.draw(T + H, gen)
    model = forecaster.fit(y[:T])
    fc = model.forecast(H).point
    return fc - y[T:], fc, (y[:T], model)


def _inner_sigma(
    train: np.ndarray,
    model,
    forecaster: ForecasterSpec,
    bootstrap: BootstrapSpec,
    H: int,
    B_inner: int,
    source: RandomSource,
) -> np.ndarray:
    plan = BootstrapPlan(train, bootstrap, model=model)
    errs = np.empty((B_inner, H))
    for j in range(B_inner):
        errs[j] = _replicate_errors(plan, forecaster, train.size, H, source.child(j).generator())[0]
    return estimate_sigma(errs).sigma


def _parallel_map(fn, items, threads: int):
    if threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


@operation("regions.bootstrap_prediction_errors")
def bootstrap_prediction_errors(
    series,
    forecaster: ForecasterSpec,
    bootstrap: BootstrapSpec,
    H: int,
    B: int,
    source: RandomSource,
    sigma_mode: str = "shared",
    B_inner: int = 100,
    threads: int = 1,
    model=None,
) -> BootstrapErrors:
    """Steps 1-3 of the k-FWE construction for B replicates.

    Replicate ``b`` draws from stream ``source.child(0, b)``; in double
    mode its inner replicate ``j`` uses ``source.child(1, b, j)``. Results
    are therefore identical for any ``threads``.
    """
    y = as_values(series)
    T = y.size
    if model is None:
        model = forecaster.fit(y)
    path = model.forecast(H)
    plan = BootstrapPlan(y, bootstrap, model=model)
    double = sigma_mode == "double"
    if sigma_mode not in ("shared", "double"):
        raise ValueError("sigma_mode must be 'shared' or 'double'")

    def one(b: int):
        err, fc, (train, fitted) = _replicate_errors(plan, forecaster, T, H, source.child(0, b).generator())
        sd = _inner_sigma(train, fitted, forecaster, bootstrap, H, B_inner, source.child(1, b)) if double else None
        return err, fc, sd

    out = _parallel_map(one, range(B), threads)
    errors = np.array([o[0] for o in out])
    forecasts = np.array([o[1] for o in out])
    rep_sigma = np.array([o[2] for o in out]) if double else None
    return BootstrapErrors(path, errors, forecasts, rep_sigma)


@operation("regions.kfwe_region")
def kfwe_region(
    series,
    forecaster: ForecasterSpec,
    bootstrap: BootstrapSpec,
    H: int,
    k: int,
    alpha: float,
    B: int,
    sided: str = "two",
    sigma_mode: str = "shared",
    B_inner: int = 100,
    seed: int = 0,
    threads: int = 1,
) -> JointRegion:
    """Bootstrap k-FWE joint prediction region for the next H observations.

    In ``shared`` mode every replicate is standardized by the sigma of the
    real series (the sd of the bootstrap errors); ``double`` mode gives each
    replicate its own sigma from ``B_inner`` inner replicates.
    """
    if B < 100:
        raise ValueError(f"B must be at least 100, got {B}")
    if B < 1000:
        warnings.warn(f"B={B} bootstrap replicates; at least 1000 are recommended", BootstrapSizeWarning, stacklevel=2)
    _check_alpha(alpha)
    if not 1 <= k <= H:
        raise KOutOfRangeError(f"k must lie in [1, {H}], got {k}")
    boot = bootstrap_prediction_errors(
        series, forecaster, bootstrap, H, B, RandomSource(seed), sigma_mode, B_inner, threads
    )
    sigma = estimate_sigma(boot.errors)
    rep_sigma = boot.replicate_sigma if boot.replicate_sigma is not None else sigma
    S = standardize(boot.errors, rep_sigma)
    return kfwe_region_from_errors(boot.path, sigma, S, k, alpha, sided)


# ---------------------------------------------------------------------------
# Joint marginals


def bonferroni_levels(alpha: float, H: int) -> np.ndarray:
    """Per-horizon coverage 1 - alpha/H."""
    return np.full(int(H), 1.0 - alpha / H)


def bh_levels(alpha: float, H: int) -> np.ndarray:
    """Per-horizon coverage 1 - alpha*h/H, loosening with the horizon."""
    h = np.arange(1, int(H) + 1)
    return 1.0 - alpha * h / H


def sidak_levels(alpha: float, H: int) -> np.ndarray:
    """Per-horizon coverage (1 - alpha)^(1/H)."""
    return np.full(int(H), (1.0 - alpha) ** (1.0 / H))


_LEVELS = {"bonferroni": bonferroni_levels, "bh": bh_levels, "sidak": sidak_levels}


@operation("regions.marginal_region")
def marginal_region(
    path: PathForecast | Sequence[float],
    sigma: SigmaEstimate | Sequence[float],
    S,
    levels,
    method: str = "marginal",
    alpha: float | None = None,
) -> JointRegion:
    """Concatenate per-horizon intervals yhat(h) +- q_h * sigma(h).

    ``q_h`` is the empirical quantile of ``|S[:, h]|`` at ``levels[h]``.
    """
    point = path.point if isinstance(path, PathForecast) else np.asarray(path, dtype=float)
    sd = sigma.sigma if isinstance(sigma, SigmaEstimate) else np.asarray(sigma, dtype=float)
    S = _matrix(S, "standardized errors")
    lv = np.asarray(levels, dtype=float).ravel()
    if not (lv.size == point.size == sd.size == S.shape[1]):
        raise HorizonMismatchError("levels, path, sigma and error matrix disagree on H")
    if np.any(~(sd > 0)):
        raise DegenerateColumnError("sigma must be positive")
    q = np.array([empirical_quantile(np.abs(S[:, h]), lv[h]) for h in range(lv.size)])
    a = float(1.0 - lv.min()) if alpha is None else alpha
    return JointRegion(point - q * sd, point + q * sd, method, a, 1, "two")


# ---------------------------------------------------------------------------
# Scheffé-type regions


@operation("regions.estimate_cov")
def estimate_cov(replicate_errors) -> np.ndarray:
    """Sample covariance of the error rows (divisor B - 1)."""
    e = _matrix(replicate_errors)
    B, H = e.shape
    if B <= H:
        raise RankDeficientError(f"need more than H = {H} replicates for a covariance, got {B}")
    return np.atleast_2d(np.cov(e, rowvar=False, ddof=1))


def scheffe_multipliers(alpha: float, H: int) -> np.ndarray:
    """sqrt(chi2_{h, 1-alpha} / h) for h = 1..H."""
    _check_alpha(alpha)
    return np.array([math.sqrt(chi_square_quantile(h, 1.0 - alpha) / h) for h in range(1, H + 1)])


@operation("regions.modified_scheffe_region")
def modified_scheffe_region(path: PathForecast | Sequence[float], cov, alpha: float, T: int) -> JointRegion:
    """Rectangle yhat +- |P| v with P = chol(cov / T) and v_h = sqrt(chi2_{h,1-alpha}/h)."""
    point = path.point if isinstance(path, PathForecast) else np.asarray(path, dtype=float)
    c = np.asarray(cov, dtype=float)
    if c.shape != (point.size, point.size):
        raise HorizonMismatchError(f"covariance shape {c.shape} does not match H = {point.size}")
    P = cholesky(c / T)
    half = np.abs(P) @ scheffe_multipliers(alpha, point.size)
    return JointRegion(point - half, point + half, "scheffe", alpha, 1, "two")


def scheffe_statistic(x, center, cov) -> float:
    """Quadratic form (c - x)' cov^{-1} (c - x) via a Cholesky solve."""
    d = np.asarray(center, dtype=float) - np.asarray(x, dtype=float)
    z = solve_lower(cholesky(cov), d)
    return float(np.dot(z, z))


def scheffe_contains(x, center, cov, alpha: float) -> bool:
    """Membership in the elliptical Scheffé region; no projection is done."""
    H = np.size(center)
    return scheffe_statistic(x, center, cov) <= chi_square_quantile(H, 1.0 - alpha)


# ---------------------------------------------------------------------------
# Nearest-paths envelope


@operation("regions.np_heuristic_region")
def np_heuristic_region(center: PathForecast | Sequence[float], bootstrap_paths, alpha: float) -> JointRegion:
    """Envelope of the bootstrap paths left after dropping the ceil(alpha*B) farthest.

    Distance is Euclidean to ``center``; at equal distance the path with
    the higher replicate index is dropped first.
    """
    c = center.point if isinstance(center, PathForecast) else np.asarray(center, dtype=float)
    rows = [p.point if isinstance(p, PathForecast) else np.asarray(p, dtype=float) for p in bootstrap_paths]
    if len(rows) < 2:
        raise ValueError("need at least 2 bootstrap paths")
    if any(r.size != c.size for r in rows):
        raise HorizonMismatchError("bootstrap paths and center have different horizons")
    _check_alpha(alpha)
    paths = np.vstack(rows)
    B = paths.shape[0]
    dist = np.sqrt(((paths - c) ** 2).sum(axis=1))
    order = np.lexsort((np.arange(B), dist))
    n_keep = max(B - quantile_rank(alpha, B), 1)
    kept = paths[order[:n_keep]]
    return JointRegion(kept.min(axis=0), kept.max(axis=0), "np", alpha, 1, "two")


def np_discard_count(alpha: float, B: int) -> int:
    return quantile_rank(alpha, B)


# ---------------------------------------------------------------------------
# Evaluation helpers


@operation("regions.contains")
def contains(region: JointRegion, actual, k: int = 1) -> tuple[bool, int]:
    """Closed-interval membership; success when at most k - 1 horizons miss."""
    y = np.asarray(actual, dtype=float).ravel()
    if y.size != region.horizon:
        raise LengthMismatchError(f"actual has length {y.size}, region has H = {region.horizon}")
    misses = int(np.count_nonzero((y < region.lower) | (y > region.upper)))
    return misses <= k - 1, misses


@operation("regions.geometric_width")
def geometric_width(region: JointRegion) -> float:
    """(prod_h w_h)^(1/H), computed in log space; 0 if any width is 0."""
    w = region.widths
    if not np.all(np.isfinite(w)):
        raise InfiniteBoundError("geometric width needs finite bounds")
    if np.any(w <= 0):
        return 0.0
    return float(np.exp(np.mean(np.log(w))))


def build_region(
    method: str,
    boot: BootstrapErrors,
    H: int,
    alpha: float,
    k: int = 1,
    sided: str = "two",
    scheffe_T: int = 1,
) -> JointRegion:
    """Any supported region from one bootstrap pass, truncated to horizon H.

    Methods other than ``kfwe`` are two-sided and ignore ``k`` in
    construction; the returned region carries ``k`` so :func:`contains`
    can apply the k-FWE success rule to it. ``scheffe_T=1`` treats the
    bootstrap error covariance as already on the forecast-error scale.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    errors = boot.errors[:, :H]
    path = boot.path.head(H)
    if method == "np":
        reg = np_heuristic_region(path, path.point[None, :] - errors, alpha)
    elif method == "scheffe":
        reg = modified_scheffe_region(path, estimate_cov(errors), alpha, scheffe_T)
    else:
        sigma = estimate_sigma(errors)
        if method == "kfwe":
            rep = boot.replicate_sigma[:, :H] if boot.replicate_sigma is not None else sigma
            return kfwe_region_from_errors(path, sigma, standardize(errors, rep), k, alpha, sided)
        S = standardize(errors, sigma)
        reg = marginal_region(path, sigma, S, _LEVELS[method](alpha, H), method, alpha)
    return JointRegion(reg.lower, reg.upper, reg.method, alpha, k, "two")


def write_region_csv(region: JointRegion, point, path) -> None:
    """CSV with header ``h,lower,upper,point``; unbounded sides print as -inf/inf."""
    pt = point.point if isinstance(point, PathForecast) else np.asarray(point, dtype=float)
    lines = ["h,lower,upper,point"]
    for h in range(region.horizon):
        lines.append(f"{h + 1},{_fmt(region.lower[h])},{_fmt(region.upper[h])},{_fmt(pt[h])}")
    text = "\n".join(lines) + "\n"
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8", newline="\n")


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))
