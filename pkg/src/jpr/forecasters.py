"""Point forecasters: exponential smoothing, AR(p) and differenced AR.

Every fitted model is immutable and exposes ``forecast(H)`` and
``simulate(length, innovations, rng)``; the module-level
:func:`forecast_path` and :func:`simulate` just dispatch to them.
:class:`ForecasterSpec` bundles the fitting recipe so bootstrap code can
refit the same model on every replicate.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.signal import lfilter, lfiltic

from .errors import (
    AllFitsFailedError,
    ConstantSeriesError,
    EmptySeriesError,
    InconsistentHorizonError,
    JPRError,
    NoResidualsError,
    NotFittedError,
    ParseError,
    PeriodInvalidError,
    SeriesTooShortError,
    SingularSystemError,
    operation,
)
from .rng import RandomSource
from .series import acf, as_values, difference, durbin_levinson, integrate

PARAM_GRID = np.round(np.arange(1, 100) / 100.0, 2)
RESAMPLE_RESIDUALS = "resample"
GAUSSIAN = "gaussian"


# ---------------------------------------------------------------------------
# Reports and forecasts


def aic(k: int, loglik: float) -> float:
    return 2.0 * k - 2.0 * loglik


def bic(k: int, n: int, loglik: float) -> float:
    return k * math.log(n) - 2.0 * loglik


def gaussian_loglik(sse: float, n: int) -> float:
    """Concentrated Gaussian log-likelihood -(n/2)(ln(2*pi*sigma^2) + 1)."""
    var = max(sse / n, np.finfo(float).tiny)
    return -0.5 * n * (math.log(2.0 * math.pi * var) + 1.0)


@dataclass(frozen=True)
class FitReport:
    loglik: float
    n_params: int
    n_obs: int

    @property
    def aic(self) -> float:
        return aic(self.n_params, self.loglik)

    @property
    def bic(self) -> float:
        return bic(self.n_params, self.n_obs, self.loglik)

    def criterion(self, name: str) -> float:
        name = name.lower()
        if name not in ("aic", "bic"):
            raise ValueError(f"unknown criterion {name!r}")
        return self.aic if name == "aic" else self.bic

    def lines(self) -> list[str]:
        return [
            f"loglik = {self.loglik:.10g}",
            f"n_params = {self.n_params}",
            f"n_obs = {self.n_obs}",
            f"aic = {self.aic:.10g}",
            f"bic = {self.bic:.10g}",
        ]


@dataclass(frozen=True)
class PathForecast:
    point: np.ndarray
    sigma: np.ndarray | None = None

    def __post_init__(self):
        point = np.asarray(self.point, dtype=float).ravel()
        object.__setattr__(self, "point", point)
        if self.sigma is not None:
            sigma = np.asarray(self.sigma, dtype=float).ravel()
            if sigma.size != point.size:
                raise InconsistentHorizonError("sigma and point lengths differ")
            if np.any(sigma <= 0):
                raise ValueError("sigma entries must be positive")
            object.__setattr__(self, "sigma", sigma)

    @property
    def horizon(self) -> int:
        return self.point.size

    def head(self, H: int) -> "PathForecast":
        sigma = None if self.sigma is None else self.sigma[:H]
        return PathForecast(self.point[:H], sigma)


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RandomSource):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError("rng must be a RandomSource or numpy Generator")


def draw_innovations(
    residuals: np.ndarray,
    sigma: float,
    length: int,
    innovations: str,
    rng: np.random.Generator,
    noise_sd: float = 0.0,
) -> np.ndarray:
    """IID innovations: centered residuals resampled, or N(0, sigma^2).

    ``noise_sd > 0`` adds Gaussian jitter to each draw (smoothed bootstrap).
    """
    if innovations == RESAMPLE_RESIDUALS:
        if residuals.size == 0:
            raise NoResidualsError("model has no stored residuals to resample")
        centered = residuals - residuals.mean()
        eps = centered[rng.integers(0, centered.size, size=length)]
    elif innovations == GAUSSIAN:
        eps = rng.normal(0.0, sigma, size=length) if sigma > 0 else np.zeros(length)
    else:
        raise ValueError(f"unknown innovation scheme {innovations!r}")
    if noise_sd > 0:
        eps = eps + rng.normal(0.0, noise_sd, size=length)
    return eps


# ---------------------------------------------------------------------------
# Exponential smoothing


def _smooth(y: Sequence[float], kind: str, m: int, a, b, g, collect: bool = False):
    """Run the additive smoothing recursions.

    Written with plain arithmetic so ``a, b, g`` may be floats (one fit) or
    numpy arrays (a whole parameter grid at once). Returns
    ``(sse, residuals, level, trend, season_buffer)`` where
    ``season_buffer[j]`` is the latest seasonal value for phase ``j``.
    """
    n = len(y)
    resid = []
    sse = 0.0
    if kind == "ses":
        lvl, tr, buf, start, first_resid = y[0], 0.0, [], 1, 1
    elif kind == "holt":
        lvl, tr, buf, start, first_resid = y[1], y[1] - y[0], [], 2, 2
    else:
        mean1 = sum(y[:m]) / m
        mean2 = sum(y[m : 2 * m]) / m
        tr = (mean2 - mean1) / m
        lvl = mean1 + tr * (m - 1) / 2.0
        buf = [y[j] - (mean1 + tr * (j - (m - 1) / 2.0)) for j in range(m)]
        start, first_resid = m, m
    for t in range(start, n):
        yt = y[t]
        if kind == "ses":
            e = yt - lvl
            lvl = lvl + a * e
        elif kind == "holt":
            pred = lvl + tr
            e = yt - pred
            new = pred + a * e
            tr = b * (new - lvl) + (1.0 - b) * tr
            lvl = new
        else:
            j = t % m
            s_old = buf[j]
            pred = lvl + tr + s_old
            e = yt - pred
            new = a * (yt - s_old) + (1.0 - a) * (lvl + tr)
            buf[j] = g * (yt - lvl - tr) + (1.0 - g) * s_old
            tr = b * (new - lvl) + (1.0 - b) * tr
            lvl = new
        if t >= first_resid:
            sse = sse + e * e
            if collect:
                resid.append(e)
    return sse, resid, lvl, tr, buf


def _grid_search(y, kind, m, fixed: dict) -> dict:
    """Pick missing smoothing parameters from PARAM_GRID by in-sample SSE.

    SES and Holt search their full grids jointly. Holt-Winters cycles
    through one parameter at a time over the same grid until no parameter
    changes.
    """
    names = {"ses": ["alpha"], "holt": ["alpha", "beta"], "hw": ["alpha", "beta", "gamma"]}[kind]
    free = [nm for nm in names if fixed.get(nm) is None]
    params = {nm: (fixed[nm] if fixed.get(nm) is not None else 0.1) for nm in names}
    if not free:
        return params

    def run(p):
        return _smooth(y, kind, m, p.get("alpha"), p.get("beta", 0.0), p.get("gamma", 0.0))[0]

    if kind != "hw":
        mesh = np.meshgrid(*[PARAM_GRID] * len(free), indexing="ij")
        trial = dict(params)
        for nm, arr in zip(free, mesh):
            trial[nm] = arr.ravel()
        sse = np.nan_to_num(np.asarray(run(trial)), nan=np.inf)
        best = int(np.argmin(sse))
        for nm, arr in zip(free, mesh):
            params[nm] = float(arr.ravel()[best])
        return params

    for _ in range(10):
        changed = False
        for nm in free:
            trial = dict(params)
            trial[nm] = PARAM_GRID
            sse = np.nan_to_num(np.asarray(run(trial)), nan=np.inf)
            val = float(PARAM_GRID[int(np.argmin(sse))])
            if val != params[nm]:
                params[nm] = val
                changed = True
        if not changed:
            break
    return params


@dataclass(frozen=True)
class SmoothingState:
    """Terminal state of a fitted additive exponential smoothing model.

    ``seasonal[i]`` is the seasonal index applied at forecast step
    ``i + 1`` (and every ``m`` steps after it).
    """

    kind: str
    level: float
    trend: float
    seasonal: np.ndarray
    alpha: float
    beta: float
    gamma: float
    period: int
    residuals: np.ndarray = field(repr=False)
    n_obs: int = 0

    def forecast(self, H: int) -> PathForecast:
        if H < 1:
            raise ValueError("H must be at least 1")
        if self.kind == "ses":
            return PathForecast(np.full(H, self.level))
        h = np.arange(1, H + 1)
        point = self.level + h * self.trend
        if self.kind == "hw":
            point = point + self.seasonal[(h - 1) % self.period]
        return PathForecast(point)

    def simulate(self, length: int, innovations: str, rng, noise_sd: float = 0.0) -> np.ndarray:
        gen = _as_generator(rng)
        sigma = float(np.sqrt(np.mean(self.residuals**2))) if self.residuals.size else 0.0
        eps = draw_innovations(self.residuals, sigma, length, innovations, gen, noise_sd).tolist()
        a, b, g, m = self.alpha, self.beta, self.gamma, self.period
        lvl, tr = self.level, self.trend
        buf = self.seasonal.tolist()
        out = np.empty(length)
        for t in range(length):
            if self.kind == "ses":
                y = lvl + eps[t]
                lvl = lvl + a * eps[t]
            elif self.kind == "holt":
                pred = lvl + tr
                y = pred + eps[t]
                new = pred + a * eps[t]
                tr = b * (new - lvl) + (1.0 - b) * tr
                lvl = new
            else:
                j = t % m
                s_old = buf[j]
                y = lvl + tr + s_old + eps[t]
                new = a * (y - s_old) + (1.0 - a) * (lvl + tr)
                buf[j] = g * (y - lvl - tr) + (1.0 - g) * s_old
                tr = b * (new - lvl) + (1.0 - b) * tr
                lvl = new
            out[t] = y
        return out


def _fit_smoothing(series, kind: str, m: int, alpha, beta, gamma) -> tuple[SmoothingState, FitReport]:
    y = as_values(series).tolist()
    params = _grid_search(y, kind, m, {"alpha": alpha, "beta": beta, "gamma": gamma})
    a = params["alpha"]
    b = params.get("beta", 0.0)
    g = params.get("gamma", 0.0)
    for name, val in (("alpha", a), ("beta", b), ("gamma", g)):
        if not 0.0 <= val <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {val}")
    sse, resid, lvl, tr, buf = _smooth(y, kind, m, a, b, g, collect=True)
    if kind == "hw":
        n = len(y)
        seasonal = np.array([buf[(n + i) % m] for i in range(m)])
    else:
        seasonal = np.zeros(0)
    residuals = np.asarray(resid, dtype=float)
    state = SmoothingState(
        kind=kind,
        level=float(lvl),
        trend=float(tr),
        seasonal=seasonal,
        alpha=float(a),
        beta=float(b),
        gamma=float(g),
        period=m,
        residuals=residuals,
        n_obs=len(y),
    )
    n_smooth = {"ses": 1, "holt": 2, "hw": 3}[kind]
    n_init = {"ses": 1, "holt": 2, "hw": 2 + m}[kind]
    n_res = max(residuals.size, 1)
    report = FitReport(gaussian_loglik(float(sse), n_res), n_smooth + n_init, n_res)
    return state, report


@operation("forecasters.fit_ses")
def fit_ses(series, alpha: float | None = None) -> tuple[SmoothingState, FitReport]:
    """Simple exponential smoothing; ``alpha=None`` selects it by grid search."""
    y = as_values(series)
    if y.size < 2:
        raise EmptySeriesError("simple exponential smoothing needs at least 2 observations")
    return _fit_smoothing(y, "ses", 1, alpha, None, None)


@operation("forecasters.fit_holt")
def fit_holt(series, alpha: float | None = None, beta: float | None = None) -> tuple[SmoothingState, FitReport]:
    """Holt's linear trend method, initialised at t = 2 with l = y_2, b = y_2 - y_1."""
    y = as_values(series)
    if y.size < 3:
        raise SeriesTooShortError("Holt's method needs at least 3 observations")
    return _fit_smoothing(y, "holt", 1, alpha, beta, None)


@operation("forecasters.fit_holt_winters")
def fit_holt_winters(
    series,
    alpha: float | None = None,
    beta: float | None = None,
    gamma: float | None = None,
    period: int = 12,
) -> tuple[SmoothingState, FitReport]:
    """Additive Holt-Winters.

    Initial states come from the first two seasons: the trend is the
    difference of the two season means divided by ``period``, and level and
    seasonal indices are taken relative to that trend line so a noiseless
    trend-plus-season input is reproduced exactly.
    """
    y = as_values(series)
    m = int(period)
    if m < 2:
        raise PeriodInvalidError(f"Holt-Winters needs period >= 2, got {period}")
    if y.size < 2 * m + 2:
        raise SeriesTooShortError(f"need at least 2*period + 2 = {2 * m + 2} observations, got {y.size}")
    return _fit_smoothing(y, "hw", m, alpha, beta, gamma)


# ---------------------------------------------------------------------------
# Autoregression


def _differencing_lags(d: int, D: int, period: int | None) -> list[int]:
    if D and not period:
        raise PeriodInvalidError("seasonal differencing needs a period")
    return [1] * int(d) + [int(period)] * int(D) if D else [1] * int(d)


def _stages(y: np.ndarray, lags: list[int]) -> list[np.ndarray]:
    stages = [y]
    for lag in lags:
        stages.append(difference(stages[-1], lag, 1))
    return stages


@dataclass(frozen=True)
class ARModel:
    """AR(p) on the (optionally) differenced series.

    ``history`` keeps the training series so forecasts and simulations can
    be integrated back to the original scale.
    """

    p: int
    coefficients: np.ndarray
    intercept: float
    sigma: float
    d: int
    D: int
    period: int | None
    residuals: np.ndarray = field(repr=False)
    history: np.ndarray = field(repr=False)

    @property
    def lags(self) -> list[int]:
        return _differencing_lags(self.d, self.D, self.period)

    @property
    def mean(self) -> float:
        """Unconditional mean of the differenced process."""
        return self.intercept / (1.0 - float(np.sum(self.coefficients)))

    def _run(self, eps: np.ndarray) -> np.ndarray:
        stages = _stages(self.history, self.lags)
        w = stages[-1]
        ar = np.concatenate([[1.0], -self.coefficients])
        drive = self.intercept + eps
        if self.p:
            zi = lfiltic([1.0], ar, w[::-1][: self.p])
            future, _ = lfilter([1.0], ar, drive, zi=zi)
        else:
            future = drive
        for lag, stage in zip(reversed(self.lags), reversed(stages[:-1])):
            future = integrate(stage[-lag:], future, lag)[lag:]
        return future

    def forecast(self, H: int) -> PathForecast:
        if H < 1:
            raise ValueError("H must be at least 1")
        return PathForecast(self._run(np.zeros(H)))

    def simulate(self, length: int, innovations: str, rng, noise_sd: float = 0.0) -> np.ndarray:
        gen = _as_generator(rng)
        eps = draw_innovations(self.residuals, self.sigma, length, innovations, gen, noise_sd)
        return self._run(eps)


def _ar_ols(w: np.ndarray, p: int) -> tuple[float, np.ndarray]:
    n = w.size
    X = np.column_stack([np.ones(n - p)] + [w[p - i : n - i] for i in range(1, p + 1)])
    beta, _, rank, _ = np.linalg.lstsq(X, w[p:], rcond=None)
    if rank < p + 1:
        raise SingularSystemError(f"lagged design matrix for AR({p}) is rank deficient")
    return float(beta[0]), beta[1:]


def _ar_yule_walker(w: np.ndarray, p: int) -> tuple[float, np.ndarray]:
    try:
        r = acf(w, p)
    except ConstantSeriesError as exc:
        raise SingularSystemError("constant series; Yule-Walker system is singular") from exc
    try:
        phi = durbin_levinson(r)[1]
    except ConstantSeriesError as exc:
        raise SingularSystemError(str(exc)) from exc
    return float(w.mean() * (1.0 - phi.sum())), phi


def _fit_ar_differenced(w: np.ndarray, p: int, method: str) -> tuple[float, np.ndarray, np.ndarray]:
    if p < 0:
        raise ValueError("p must be nonnegative")
    if w.size <= 2 * p + 1:
        raise SeriesTooShortError(f"AR({p}) needs more than {2 * p + 1} observations, got {w.size}")
    if p == 0:
        c, phi = float(w.mean()), np.zeros(0)
    elif method == "ols":
        c, phi = _ar_ols(w, p)
    elif method in ("yule_walker", "yw"):
        c, phi = _ar_yule_walker(w, p)
    else:
        raise ValueError(f"unknown AR fitting method {method!r}")
    n = w.size
    fitted = c + sum(phi[i - 1] * w[p - i : n - i] for i in range(1, p + 1)) if p else np.full(n, c)
    resid = w[p:] - fitted
    return c, phi, resid


@operation("forecasters.fit_ari")
def fit_ari(
    series,
    p: int,
    d: int = 0,
    D: int = 0,
    period: int | None = None,
    method: str = "ols",
) -> tuple[ARModel, FitReport]:
    """Difference ``d`` times at lag 1 and ``D`` times at lag ``period``, then fit AR(p)."""
    y = as_values(series)
    lags = _differencing_lags(d, D, period)
    if y.size <= sum(lags) + 2 * p + 1:
        raise SeriesTooShortError(
            f"length {y.size} too short for d={d}, D={D}, period={period}, p={p}"
        )
    w = _stages(y, lags)[-1]
    c, phi, resid = _fit_ar_differenced(w, int(p), method)
    sse = float(np.dot(resid, resid))
    sigma = math.sqrt(sse / resid.size)
    model = ARModel(
        p=int(p),
        coefficients=np.asarray(phi, dtype=float),
        intercept=c,
        sigma=sigma,
        d=int(d),
        D=int(D),
        period=int(period) if period else None,
        residuals=resid,
        history=y.copy(),
    )
    return model, FitReport(gaussian_loglik(sse, resid.size), int(p) + 2, resid.size)


@operation("forecasters.fit_ar")
def fit_ar(series, p: int, method: str = "ols") -> tuple[ARModel, FitReport]:
    """AR(p) with intercept by OLS or Yule-Walker; residual sd is the MLE."""
    return fit_ari(series, p, 0, 0, None, method)


def order_criteria(
    series,
    p_candidates: Iterable[int],
    d: int = 0,
    D: int = 0,
    period: int | None = None,
    criterion: str = "aic",
    method: str = "ols",
) -> dict[int, float]:
    """Information criterion per candidate order on a common effective sample.

    Every candidate drops the same leading ``max(p)`` differenced values, so
    the likelihoods are comparable. Candidates that fail to fit are absent.
    """
    y = as_values(series)
    w = _stages(y, _differencing_lags(d, D, period))[-1]
    cands = sorted(set(int(p) for p in p_candidates))
    if not cands:
        raise AllFitsFailedError("no candidate orders given")
    pmax = cands[-1]
    out = {}
    for p in cands:
        try:
            _, _, resid = _fit_ar_differenced(w[pmax - p :], p, method)
        except JPRError:
            continue
        sse = float(np.dot(resid, resid))
        rep = FitReport(gaussian_loglik(sse, resid.size), p + 2, resid.size)
        out[p] = rep.criterion(criterion)
    return out


@operation("forecasters.select_order")
def select_order(
    series,
    p_candidates: Iterable[int],
    d: int = 0,
    D: int = 0,
    period: int | None = None,
    criterion: str = "aic",
    method: str = "ols",
) -> tuple[ARModel, FitReport]:
    """Fit every candidate order and keep the criterion minimiser.

    Ties go to the smaller order. The winner is refitted on the full sample.
    """
    scores = order_criteria(series, p_candidates, d, D, period, criterion, method)
    if not scores:
        raise AllFitsFailedError("every candidate order failed to fit")
    best = min(scores, key=lambda p: (scores[p], p))
    return fit_ari(series, best, d, D, period, method)


# ---------------------------------------------------------------------------
# Dispatch


@operation("forecasters.forecast_path")
def forecast_path(model, H: int) -> PathForecast:
    if model is None or not hasattr(model, "forecast"):
        raise NotFittedError("forecast_path needs a fitted SmoothingState or ARModel")
    return model.forecast(H)


@operation("forecasters.simulate")
def simulate(model, length: int, innovations: str = RESAMPLE_RESIDUALS, rng=None, noise_sd: float = 0.0) -> np.ndarray:
    """Run the fitted recursion forward ``length`` steps past the data.

    Innovations are IID draws of the mean-centered residuals or Gaussian
    with the fitted innovation sd; the run starts from the model's terminal
    state, and differencing is re-integrated for differenced AR fits.
    """
    if model is None or not hasattr(model, "simulate"):
        raise NotFittedError("simulate needs a fitted SmoothingState or ARModel")
    if rng is None:
        raise ValueError("simulate needs an explicit random source")
    return model.simulate(int(length), innovations, rng, noise_sd)


@dataclass(frozen=True)
class ForecasterSpec:
    """How to fit a point forecaster; ``None`` smoothing parameters mean AUTO.

    ``model`` is one of ``ses``, ``holt``, ``hw``, ``ar`` (AR(p) after ``d``
    simple and ``D`` seasonal differences) or ``auto`` (order chosen from
    ``0..p_max`` by ``criterion``).
    """

    model: str = "ar"
    p: int = 1
    d: int = 0
    D: int = 0
    period: int | None = None
    method: str = "ols"
    alpha: float | None = None
    beta: float | None = None
    gamma: float | None = None
    p_max: int = 5
    criterion: str = "aic"

    def __post_init__(self):
        if self.model not in ("ses", "holt", "hw", "ar", "auto"):
            raise ValueError(f"unknown forecaster {self.model!r}")

    def fit(self, series):
        return self.fit_with_report(series)[0]

    def fit_with_report(self, series):
        if self.model == "ses":
            return fit_ses(series, self.alpha)
        if self.model == "holt":
            return fit_holt(series, self.alpha, self.beta)
        if self.model == "hw":
            return fit_holt_winters(series, self.alpha, self.beta, self.gamma, self.period or 12)
        if self.model == "auto":
            return select_order(series, range(self.p_max + 1), self.d, self.D, self.period, self.criterion, self.method)
        return fit_ari(series, self.p, self.d, self.D, self.period, self.method)


# ---------------------------------------------------------------------------
# External forecasts


@operation("forecasters.load_external_forecasts")
def load_external_forecasts(path) -> list[PathForecast]:
    """Read ``window,h,point`` rows into one PathForecast per window.

    Windows must run 0, 1, 2, ... and horizons 1, 2, ... within each window;
    every window must have the same horizon.
    """
    text = Path(path).read_text(encoding="utf-8")
    if not text.strip():
        return []
    reader = csv.reader(text.splitlines())
    header = next(reader)
    if [c.strip() for c in header] != ["window", "h", "point"]:
        raise ParseError(f"expected header 'window,h,point', got {','.join(header)!r}", 1)
    groups: list[list[float]] = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise ParseError(f"expected 3 fields, got {len(row)}", lineno)
        try:
            window, h, point = int(row[0]), int(row[1]), float(row[2])
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
        if not math.isfinite(point):
            raise ParseError("point forecast must be finite", lineno)
        if window == len(groups) and h == 1:
            groups.append([point])
        elif window == len(groups) - 1 and h == len(groups[-1]) + 1:
            groups[-1].append(point)
        else:
            raise ParseError(f"out-of-order record (window={window}, h={h})", lineno)
    if groups and len({len(g) for g in groups}) != 1:
        raise InconsistentHorizonError(
            "windows have different horizons: " + ", ".join(str(len(g)) for g in groups)
        )
    return [PathForecast(np.array(g)) for g in groups]
