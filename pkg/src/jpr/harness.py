"""Synthetic data, rolling-window coverage/width evaluation and report files."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .bootstrap import BootstrapSpec
from .errors import (
    ConfigError,
    ConfigTooLargeError,
    EmptyReportError,
    InvalidSeriesError,
    ParseError,
    operation,
)
from .forecasters import ForecasterSpec, load_external_forecasts
from .regions import (
    METHODS,
    JointRegion,
    bootstrap_prediction_errors,
    build_region,
    contains,
    geometric_width,
)
from .rng import RandomSource, make_rng
from .series import as_values

CellKey = tuple[str, float, int, int]  # (method, alpha, k, H)


# ---------------------------------------------------------------------------
# Synthetic series


@dataclass(frozen=True)
class SyntheticSpec:
    length: int = 3651
    period: int = 30
    baseline: float = 10.0
    slope: float = 0.05
    amplitude: float = 40.0
    noise_sd: float = 5.0
    seed: int = 42

    def __post_init__(self):
        if self.period < 2 or self.length < 4 * self.period:
            raise ConfigError("synthetic series needs period >= 2 and length >= 4*period")
        if self.noise_sd < 0:
            raise ConfigError("noise_sd must be nonnegative")


def seasonal_shape(phase: np.ndarray) -> np.ndarray:
    """One period of the synthetic waveform on phase in [0, 1).

    A cosine arc over the first 40% of the period, then an exponential decay.
    """
    return np.where(phase < 0.4, np.cos(phase * 2.0 * np.pi), np.exp(-3.0 * phase))


@operation("harness.generate_synthetic")
def generate_synthetic(spec: SyntheticSpec = SyntheticSpec()) -> np.ndarray:
    """baseline + slope*t + amplitude*shape(t mod period) + Gaussian noise."""
    t = np.arange(spec.length, dtype=float)
    phase = (np.arange(spec.length) % spec.period) / spec.period
    y = spec.baseline + spec.slope * t + spec.amplitude * seasonal_shape(phase)
    if spec.noise_sd > 0:
        y = y + make_rng(spec.seed, 0).normal(0.0, spec.noise_sd, size=spec.length)
    return y


# ---------------------------------------------------------------------------
# Configuration


@dataclass(frozen=True)
class ExperimentConfig:
    B: int
    seed: int
    window_len: int = 2245
    step: int = 10
    n_windows: int = 100
    H_list: tuple[int, ...] = (6, 12, 18, 24)
    k_list: tuple[int, ...] = (1, 2, 3)
    alpha_list: tuple[float, ...] = (0.1, 0.2, 0.3)
    methods: tuple[str, ...] = ("kfwe", "bonferroni")
    forecaster: ForecasterSpec = field(default_factory=ForecasterSpec)
    bootstrap: BootstrapSpec = field(default_factory=BootstrapSpec)
    sided: str = "two"
    sigma_mode: str = "shared"
    B_inner: int = 100
    scheffe_T: int = 1
    external_forecasts: str | None = None

    def __post_init__(self):
        if self.B < 100:
            raise ConfigError(f"B must be at least 100, got {self.B}")
        if min(self.window_len, self.step, self.n_windows) < 1:
            raise ConfigError("window_len, step and n_windows must be positive")
        if not self.H_list or not self.k_list or not self.alpha_list or not self.methods:
            raise ConfigError("H, k, alpha and methods lists must be nonempty")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown method(s): {', '.join(bad)}")
        if any(not 0 < a < 1 for a in self.alpha_list):
            raise ConfigError("alpha values must lie in (0, 1)")
        if any(k < 1 or k > min(self.H_list) for k in self.k_list):
            raise ConfigError("every k must lie in [1, min(H)]")

    @property
    def max_H(self) -> int:
        return max(self.H_list)

    def required_length(self) -> int:
        return self.window_len + (self.n_windows - 1) * self.step + self.max_H


# ---------------------------------------------------------------------------
# Rolling evaluation


@dataclass(frozen=True)
class CellResult:
    successes: int
    mean_geometric_width: float


@dataclass(frozen=True)
class EvalReport:
    n_windows: int
    cells: Mapping[CellKey, CellResult]

    def coverage(self, method: str, alpha: float, k: int, H: int) -> float:
        return self.cells[(method, alpha, k, H)].successes / self.n_windows


RegionBuilder = Callable[[np.ndarray, int, ExperimentConfig], Mapping[CellKey, "JointRegion | Bounds"]]


def window_bounds(i: int, config: ExperimentConfig) -> tuple[slice, slice]:
    """(training slice, truth slice) of window ``i``; 0-based, half-open."""
    start = i * config.step
    end = start + config.window_len
    return slice(start, end), slice(end, end + config.max_H)


def default_builder(external=None) -> RegionBuilder:
    """Region builder running one bootstrap pass per window.

    Window ``i`` uses random streams under ``(seed, i)``. With external
    forecasts, window ``i``'s ingested path replaces the model's point
    forecast as the region centre; bootstrap errors still come from the
    configured forecaster.
    """

    def build(train: np.ndarray, i: int, config: ExperimentConfig) -> dict[CellKey, JointRegion]:
        boot = bootstrap_prediction_errors(
            train,
            config.forecaster,
            config.bootstrap,
            config.max_H,
            config.B,
            RandomSource(config.seed, (i,)),
            config.sigma_mode,
            config.B_inner,
        )
        if external is not None:
            ext = external[i]
            if ext.horizon < config.max_H:
                raise ConfigError(f"external forecasts cover H = {ext.horizon} < {config.max_H}")
            boot = replace(boot, path=ext.head(config.max_H))
        out = {}
        for method in config.methods:
            for alpha in config.alpha_list:
                for H in config.H_list:
                    for k in config.k_list:
                        sided = config.sided if method == "kfwe" else "two"
                        out[(method, alpha, k, H)] = build_region(
                            method, boot, H, alpha, k, sided, config.scheffe_T
                        )
        return out

    return build


@dataclass(frozen=True)
class Bounds:
    """Bare per-horizon bounds; lets region stubs skip JointRegion's checks."""

    lower: np.ndarray
    upper: np.ndarray


def _score(region, truth: np.ndarray, k: int) -> tuple[bool, float]:
    """(success, w_geom) for anything with ``lower``/``upper`` arrays."""
    if isinstance(region, JointRegion):
        ok = contains(region, truth, k)[0]
        w = region.widths
        return ok, (geometric_width(region) if np.all(np.isfinite(w)) else math.inf)
    lo = np.asarray(region.lower, dtype=float)
    hi = np.asarray(region.upper, dtype=float)
    misses = int(np.count_nonzero((truth < lo) | (truth > hi)))
    w = hi - lo
    if not np.all(np.isfinite(w)):
        width = math.inf
    elif np.any(w <= 0):
        width = 0.0
    else:
        width = float(np.exp(np.mean(np.log(w))))
    return misses <= k - 1, width


@operation("harness.rolling_eval")
def rolling_eval(
    series,
    config: ExperimentConfig,
    threads: int = 1,
    builder: RegionBuilder | None = None,
) -> EvalReport:
    """Empirical k-FWE coverage and mean geometric width over rolling windows.

    Window ``i`` trains on ``window_len`` observations starting at
    ``i * step`` and is judged on the next H. Windows are independent and
    may run on ``threads`` workers; aggregation follows window order, so
    the report does not depend on scheduling.
    """
    y = as_values(series)
    need = config.required_length()
    if need > y.size:
        raise ConfigTooLargeError(f"configuration needs {need} observations, series has {y.size}")
    if builder is None:
        external = None
        if config.external_forecasts:
            external = load_external_forecasts(config.external_forecasts)
            if len(external) < config.n_windows:
                raise ConfigError(f"external forecasts cover {len(external)} windows, need {config.n_windows}")
        builder = default_builder(external)

    def run(i: int):
        train_sl, truth_sl = window_bounds(i, config)
        regions = builder(y[train_sl], i, config)
        truth = y[truth_sl]
        return {
            key: _score(reg, truth[: key[3]], key[2]) for key, reg in regions.items()
        }

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_window = list(pool.map(run, range(config.n_windows)))
    else:
        per_window = [run(i) for i in range(config.n_windows)]

    cells = {}
    for key in per_window[0]:
        hits = sum(int(w[key][0]) for w in per_window)
        widths = [w[key][1] for w in per_window]
        cells[key] = CellResult(hits, math.fsum(widths) / len(widths))
    return EvalReport(config.n_windows, cells)


# ---------------------------------------------------------------------------
# Files


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


def report_csv(report: EvalReport) -> str:
    if not report.cells:
        raise EmptyReportError("report has no cells")
    lines = ["method,alpha,k,H,coverage,mean_geom_width"]
    for key in sorted(report.cells):
        method, alpha, k, H = key
        cell = report.cells[key]
        lines.append(f"{method},{_fmt(alpha)},{k},{H},{cell.successes},{_fmt(cell.mean_geometric_width)}")
    return "\n".join(lines) + "\n"


@operation("harness.emit_report")
def emit_report(report: EvalReport, path) -> None:
    """Write the report CSV, rows sorted by (method, alpha, k, H)."""
    text = report_csv(report)
    Path(path).write_text(text, encoding="utf-8", newline="\n")


@operation("harness.read_series_csv")
def read_series_csv(path, fill_missing: bool = False) -> np.ndarray:
    """Read a ``value`` or ``t,value`` CSV.

    Blank or NaN values are an error unless ``fill_missing`` is set, in
    which case each gap takes the mean of its nearest valid neighbours.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError("empty series file", 1)
    header = [c.strip() for c in rows[0]]
    if header == ["value"]:
        col = 0
    elif header == ["t", "value"]:
        col = 1
    else:
        raise ParseError(f"expected header 'value' or 't,value', got {','.join(rows[0])!r}", 1)
    vals = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", lineno)
        cell = row[col].strip()
        if cell == "" or cell.lower() in ("nan", "na"):
            vals.append(math.nan)
            continue
        try:
            vals.append(float(cell))
        except ValueError:
            raise ParseError(f"not a number: {cell!r}", lineno) from None
    y = np.array(vals, dtype=float)
    missing = ~np.isfinite(y)
    if missing.any():
        if not fill_missing:
            raise InvalidSeriesError(f"{int(missing.sum())} missing value(s); use fill_missing to impute")
        y = fill_neighbor_mean(y)
    return as_values(y)


def fill_neighbor_mean(y: np.ndarray) -> np.ndarray:
    """Replace each NaN run by the mean of the valid values bracketing it."""
    y = np.array(y, dtype=float)
    ok = np.flatnonzero(np.isfinite(y))
    if ok.size == 0:
        raise InvalidSeriesError("no valid observations to impute from")
    for i in np.flatnonzero(~np.isfinite(y)):
        left = ok[ok < i]
        right = ok[ok > i]
        nb = ([y[left[-1]]] if left.size else []) + ([y[right[0]]] if right.size else [])
        y[i] = sum(nb) / len(nb)
    return y


def write_series_csv(values, path) -> None:
    lines = ["t,value"] + [f"{t},{_fmt(v)}" for t, v in enumerate(np.asarray(values, dtype=float))]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


# ---------------------------------------------------------------------------
# `key = value` config files


_FORECASTER_KEYS = {
    "model": ("model", str),
    "p": ("p", int),
    "d": ("d", int),
    "D": ("D", int),
    "period": ("period", int),
    "fit_method": ("method", str),
    "smoothing_alpha": ("alpha", float),
    "smoothing_beta": ("beta", float),
    "smoothing_gamma": ("gamma", float),
    "p_max": ("p_max", int),
    "criterion": ("criterion", str),
}
_BOOTSTRAP_KEYS = {
    "bootstrap": ("scheme", str),
    "block_len": ("block_len", int),
    "outer_block": ("outer_block", int),
    "inner_block": ("inner_block", int),
    "mean_block": ("mean_block", float),
    "sieve_order": ("sieve_order", int),
    "smoothing_noise_sd": ("smoothing_noise_sd", float),
    "bootstrap_period": ("period", int),
    "inner_scheme": ("inner_scheme", str),
}
_EXPERIMENT_KEYS = {
    "B": ("B", int),
    "seed": ("seed", int),
    "window_len": ("window_len", int),
    "step": ("step", int),
    "n_windows": ("n_windows", int),
    "H": ("H_list", "ints"),
    "k": ("k_list", "ints"),
    "alpha": ("alpha_list", "floats"),
    "methods": ("methods", "strs"),
    "sided": ("sided", str),
    "sigma": ("sigma_mode", str),
    "B_inner": ("B_inner", int),
    "scheffe_T": ("scheffe_T", int),
    "external_forecasts": ("external_forecasts", str),
}
_SYNTHETIC_KEYS = {f"synthetic_{f.name}": (f.name, type(f.default)) for f in fields(SyntheticSpec)}
_OTHER_KEYS = {"input", "fill_missing"}


def parse_config_text(text: str) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {raw!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ParseError("empty key", lineno)
        if key in out:
            raise ParseError(f"duplicate key {key!r}", lineno)
        out[key] = value
    return out


def _convert(key: str, value: str, kind):
    try:
        if kind == "ints":
            return tuple(int(v) for v in value.split(",") if v.strip())
        if kind == "floats":
            return tuple(float(v) for v in value.split(",") if v.strip())
        if kind == "strs":
            return tuple(v.strip() for v in value.split(",") if v.strip())
        if kind is bool:
            if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(value)
            return value.lower() in ("true", "1", "yes")
        return kind(value)
    except ValueError:
        raise ConfigError(f"bad value for {key!r}: {value!r}") from None


@dataclass(frozen=True)
class ExperimentSetup:
    config: ExperimentConfig
    input: str | None
    synthetic: SyntheticSpec
    fill_missing: bool = False

    def load_series(self) -> np.ndarray:
        if self.input:
            return read_series_csv(self.input, self.fill_missing)
        return generate_synthetic(self.synthetic)


def load_config(text: str, overrides: Mapping[str, str] | None = None, base_dir: Path | None = None) -> ExperimentSetup:
    """Build an :class:`ExperimentSetup` from config-file text.

    ``overrides`` (e.g. from command-line flags) take precedence; relative
    paths resolve against ``base_dir``.
    """
    raw = parse_config_text(text)
    raw.update(overrides or {})
    known = set(_FORECASTER_KEYS) | set(_BOOTSTRAP_KEYS) | set(_EXPERIMENT_KEYS) | set(_SYNTHETIC_KEYS) | _OTHER_KEYS
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    for req in ("B", "seed"):
        if req not in raw:
            raise ConfigError(f"config must set {req!r} explicitly")

    def section(table):
        return {name: _convert(key, raw[key], kind) for key, (name, kind) in table.items() if key in raw}

    try:
        forecaster = ForecasterSpec(**section(_FORECASTER_KEYS))
        bootstrap = BootstrapSpec(**section(_BOOTSTRAP_KEYS))
        synthetic = SyntheticSpec(**section(_SYNTHETIC_KEYS))
        exp = section(_EXPERIMENT_KEYS)
        if base_dir is not None and exp.get("external_forecasts"):
            exp["external_forecasts"] = str(Path(base_dir) / exp["external_forecasts"])
        config = ExperimentConfig(forecaster=forecaster, bootstrap=bootstrap, **exp)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if config.sided not in ("two", "lower", "upper"):
        raise ConfigError("sided must be two, lower or upper")
    if config.sigma_mode not in ("shared", "double"):
        raise ConfigError("sigma must be shared or double")
    inp = raw.get("input")
    if inp and base_dir is not None:
        inp = str(Path(base_dir) / inp)
    fill = _convert("fill_missing", raw["fill_missing"], bool) if "fill_missing" in raw else False
    return ExperimentSetup(config, inp, synthetic, fill)
