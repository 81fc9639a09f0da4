"""Surrogate series for dependent data.

Block schemes resample the observed values; model-based and sieve schemes
simulate from a fitted AR or smoothing model; the decomposed scheme
block-resamples the remainder of a seasonal-trend split and adds trend and
season back. Every scheme fills an arbitrary ``out_len`` (typically
``T + H``): blocks keep being drawn until the series is full and the last
one is truncated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .decompose import Decomposition, classical_decompose, recompose
from .errors import BlockLengthError, MeanBlockError, operation
from .forecasters import RESAMPLE_RESIDUALS, select_order, fit_ar, _as_generator
from .rng import RandomSource
from .series import as_values

SCHEMES = ("model", "moving", "circular", "block_of_blocks", "stationary", "sieve", "decomposed")


@dataclass(frozen=True)
class BootstrapSpec:
    """Resampling scheme and its tuning knobs.

    ``block_len=None`` means :func:`default_block_length` of the series
    length; ``sieve_order=None`` means AUTO. ``inner_scheme`` chooses how
    the ``decomposed`` scheme resamples the remainder (``moving`` or
    ``stationary``).
    """

    scheme: str = "model"
    block_len: int | None = None
    outer_block: int | None = None
    inner_block: int | None = None
    mean_block: float | None = None
    sieve_order: int | None = None
    smoothing_noise_sd: float = 0.0
    period: int | None = None
    inner_scheme: str = "moving"

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown bootstrap scheme {self.scheme!r}; choose from {', '.join(SCHEMES)}")
        if self.smoothing_noise_sd < 0:
            raise ValueError("smoothing_noise_sd must be nonnegative")
        if self.scheme == "block_of_blocks":
            k1, k2 = self.outer_block, self.inner_block
            if k1 is None or k2 is None or not 1 <= k2 < k1:
                raise BlockLengthError("block_of_blocks needs 1 <= inner_block < outer_block")
        if self.scheme == "decomposed":
            if not self.period:
                raise ValueError("decomposed bootstrap needs a period")
            if self.inner_scheme not in ("moving", "stationary"):
                raise ValueError("inner_scheme must be 'moving' or 'stationary'")


@dataclass(frozen=True)
class Replicate:
    series: np.ndarray
    scheme: BootstrapSpec
    stream_id: tuple[int, ...] | None = None

    def __len__(self) -> int:
        return self.series.size


def default_block_length(n: int) -> int:
    """round(n ** (1/3)), at least 1."""
    return max(1, int(round(n ** (1.0 / 3.0))))


def _stream_of(rng) -> tuple[int, ...] | None:
    return rng.key if isinstance(rng, RandomSource) else None


def _jitter(x: np.ndarray, sd: float, gen: np.random.Generator) -> np.ndarray:
    return x + gen.normal(0.0, sd, size=x.size) if sd > 0 else x


# ---------------------------------------------------------------------------
# Index generators (the part shared by the public functions and plans)


def moving_block_indices(n: int, k: int, out_len: int, gen: np.random.Generator) -> np.ndarray:
    if not 1 <= k <= n:
        raise BlockLengthError(f"block length must lie in [1, {n}], got {k}")
    nblocks = math.ceil(out_len / k)
    starts = gen.integers(0, n - k + 1, size=nblocks)
    return (starts[:, None] + np.arange(k)).ravel()[:out_len]


def circular_block_indices(n: int, k: int, out_len: int, gen: np.random.Generator) -> np.ndarray:
    if not 1 <= k <= n:
        raise BlockLengthError(f"block length must lie in [1, {n}], got {k}")
    nblocks = math.ceil(out_len / k)
    starts = gen.integers(0, n, size=nblocks)
    return ((starts[:, None] + np.arange(k)) % n).ravel()[:out_len]


def block_of_blocks_indices(n: int, k1: int, k2: int, out_len: int, gen: np.random.Generator) -> np.ndarray:
    if not 1 <= k2 < k1 <= n:
        raise BlockLengthError(f"need 1 <= K2 < K1 <= {n}, got K1={k1}, K2={k2}")
    nouter = math.ceil(out_len / k1)
    nsub = math.ceil(k1 / k2)
    outer = gen.integers(0, n - k1 + 1, size=nouter)
    sub = gen.integers(0, k1 - k2 + 1, size=(nouter, nsub))
    # Within each outer block, subblock offsets tile K1 positions.
    within = (sub[:, :, None] + np.arange(k2)).reshape(nouter, nsub * k2)[:, :k1]
    return (outer[:, None] + within).ravel()[:out_len]


def stationary_block_lengths(mean_block: float, count: int, gen: np.random.Generator) -> np.ndarray:
    """Geometric block lengths on {1, 2, ...} with mean ``mean_block``."""
    if not mean_block >= 1.0:
        raise MeanBlockError(f"mean block length must be >= 1, got {mean_block}")
    return gen.geometric(1.0 / mean_block, size=count)


def stationary_indices(n: int, mean_block: float, out_len: int, gen: np.random.Generator) -> np.ndarray:
    if not mean_block >= 1.0:
        raise MeanBlockError(f"mean block length must be >= 1, got {mean_block}")
    parts = []
    filled = 0
    while filled < out_len:
        length = int(stationary_block_lengths(mean_block, 1, gen)[0])
        start = int(gen.integers(0, n))
        parts.append((start + np.arange(length)) % n)
        filled += length
    return np.concatenate(parts)[:out_len]


# ---------------------------------------------------------------------------
# Public per-scheme functions


@operation("bootstrap.moving_block")
def moving_block(series, block_len: int, out_len: int, rng, noise_sd: float = 0.0) -> Replicate:
    """Concatenate overlapping blocks X[i:i+k] drawn uniformly with replacement."""
    x = as_values(series)
    gen = _as_generator(rng)
    idx = moving_block_indices(x.size, int(block_len), int(out_len), gen)
    spec = BootstrapSpec("moving", block_len=int(block_len), smoothing_noise_sd=noise_sd)
    return Replicate(_jitter(x[idx], noise_sd, gen), spec, _stream_of(rng))


@operation("bootstrap.circular_block")
def circular_block(series, block_len: int, out_len: int, rng, noise_sd: float = 0.0) -> Replicate:
    """Block starts anywhere in the series; blocks wrap around the end."""
    x = as_values(series)
    gen = _as_generator(rng)
    idx = circular_block_indices(x.size, int(block_len), int(out_len), gen)
    spec = BootstrapSpec("circular", block_len=int(block_len), smoothing_noise_sd=noise_sd)
    return Replicate(_jitter(x[idx], noise_sd, gen), spec, _stream_of(rng))


@operation("bootstrap.block_of_blocks")
def block_of_blocks(series, outer_block: int, inner_block: int, out_len: int, rng, noise_sd: float = 0.0) -> Replicate:
    """Sample outer blocks of length K1, then refill each from its own K2-subblocks."""
    x = as_values(series)
    gen = _as_generator(rng)
    idx = block_of_blocks_indices(x.size, int(outer_block), int(inner_block), int(out_len), gen)
    spec = BootstrapSpec(
        "block_of_blocks", outer_block=int(outer_block), inner_block=int(inner_block), smoothing_noise_sd=noise_sd
    )
    return Replicate(_jitter(x[idx], noise_sd, gen), spec, _stream_of(rng))


@operation("bootstrap.stationary_bootstrap")
def stationary_bootstrap(series, mean_block: float, out_len: int, rng, noise_sd: float = 0.0) -> Replicate:
    """Geometric block lengths with mean ``mean_block``, circular uniform starts."""
    x = as_values(series)
    gen = _as_generator(rng)
    idx = stationary_indices(x.size, float(mean_block), int(out_len), gen)
    spec = BootstrapSpec("stationary", mean_block=float(mean_block), smoothing_noise_sd=noise_sd)
    return Replicate(_jitter(x[idx], noise_sd, gen), spec, _stream_of(rng))


def sieve_order_cap(n: int) -> int:
    return max(1, math.ceil(10.0 * math.log10(n)))


def fit_sieve(series, order: int | None = None):
    """AR approximation for the sieve bootstrap; ``order=None`` picks it by AIC."""
    x = as_values(series)
    if order is not None:
        return fit_ar(x, int(order))[0]
    cap = min(sieve_order_cap(x.size), (x.size - 2) // 2)
    return select_order(x, range(1, max(cap, 1) + 1), criterion="aic")[0]


@operation("bootstrap.sieve_bootstrap")
def sieve_bootstrap(series, order: int | None, out_len: int, rng, noise_sd: float = 0.0) -> Replicate:
    """Fit an AR sieve and simulate it forward with resampled centered residuals."""
    model = fit_sieve(series, order)
    gen = _as_generator(rng)
    out = model.simulate(int(out_len), RESAMPLE_RESIDUALS, gen, noise_sd)
    spec = BootstrapSpec("sieve", sieve_order=model.p, smoothing_noise_sd=noise_sd)
    return Replicate(out, spec, _stream_of(rng))


@operation("bootstrap.model_based")
def model_based(model, out_len: int, rng, noise_sd: float = 0.0) -> Replicate:
    """Simulate the fitted model with resampled residuals (plus optional jitter)."""
    gen = _as_generator(rng)
    out = model.simulate(int(out_len), RESAMPLE_RESIDUALS, gen, noise_sd)
    return Replicate(out, BootstrapSpec("model", smoothing_noise_sd=noise_sd), _stream_of(rng))


def _remainder_indices(n, inner_scheme, block_len, out_len, gen):
    if inner_scheme == "stationary":
        return stationary_indices(n, float(block_len), out_len, gen)
    return moving_block_indices(n, int(block_len), out_len, gen)


@operation("bootstrap.decomposed_block")
def decomposed_block(
    series,
    period: int,
    inner_scheme: str,
    block_len: float | None,
    H: int,
    rng,
    decomposition: Decomposition | None = None,
    noise_sd: float = 0.0,
) -> Replicate:
    """Block-resample the remainder of a seasonal-trend split, then add trend and season back.

    The result has length ``T + H``; beyond the data the trend runs on a
    straight line and the season repeats. For ``inner_scheme='stationary'``
    ``block_len`` is the mean block length.
    """
    x = as_values(series)
    dec = decomposition if decomposition is not None else classical_decompose(x, period)
    gen = _as_generator(rng)
    k = default_block_length(x.size) if block_len is None else block_len
    idx = _remainder_indices(x.size, inner_scheme, k, x.size + int(H), gen)
    rem = _jitter(dec.remainder[idx], noise_sd, gen)
    out = recompose(dec, rem, int(H), dec.period)
    spec = BootstrapSpec("decomposed", block_len=k if inner_scheme == "moving" else None,
                         mean_block=k if inner_scheme == "stationary" else None,
                         period=dec.period, inner_scheme=inner_scheme, smoothing_noise_sd=noise_sd)
    return Replicate(out, spec, _stream_of(rng))


# ---------------------------------------------------------------------------
# Plans: per-series preparation reused across many replicates


class BootstrapPlan:
    """A bootstrap scheme bound to one observed series.

    Fitting (sieve, model) and decomposition happen once here; ``draw``
    then only consumes random numbers, so it is cheap and safe to call from
    several threads with distinct generators.
    """

    def __init__(self, series, spec: BootstrapSpec, model=None):
        self.values = as_values(series)
        n = self.values.size
        if spec.scheme in ("moving", "circular") and spec.block_len is None:
            spec = replace(spec, block_len=default_block_length(n))
        if spec.scheme == "stationary" and spec.mean_block is None:
            spec = replace(spec, mean_block=float(default_block_length(n)))
        if spec.scheme == "decomposed" and spec.block_len is None and spec.mean_block is None:
            spec = replace(spec, block_len=default_block_length(n))
        self.spec = spec
        self.model = None
        self.decomposition = None
        if spec.scheme == "model":
            if model is None:
                raise ValueError("model-based bootstrap needs a fitted model")
            self.model = model
        elif spec.scheme == "sieve":
            self.model = fit_sieve(self.values, spec.sieve_order)
        elif spec.scheme == "decomposed":
            self.decomposition = classical_decompose(self.values, spec.period)

    def draw(self, out_len: int, gen: np.random.Generator) -> np.ndarray:
        s, x, n = self.spec, self.values, self.values.size
        sd = s.smoothing_noise_sd
        if s.scheme in ("model", "sieve"):
            return self.model.simulate(out_len, RESAMPLE_RESIDUALS, gen, sd)
        if s.scheme == "moving":
            return _jitter(x[moving_block_indices(n, s.block_len, out_len, gen)], sd, gen)
        if s.scheme == "circular":
            return _jitter(x[circular_block_indices(n, s.block_len, out_len, gen)], sd, gen)
        if s.scheme == "block_of_blocks":
            return _jitter(x[block_of_blocks_indices(n, s.outer_block, s.inner_block, out_len, gen)], sd, gen)
        if s.scheme == "stationary":
            return _jitter(x[stationary_indices(n, s.mean_block, out_len, gen)], sd, gen)
        if out_len < n:
            raise BlockLengthError(f"decomposed replicates cannot be shorter than the series ({n})")
        dec = self.decomposition
        k = s.mean_block if s.inner_scheme == "stationary" and s.mean_block else s.block_len
        idx = _remainder_indices(n, s.inner_scheme, k, out_len, gen)
        return recompose(dec, _jitter(dec.remainder[idx], sd, gen), out_len - n, dec.period)

    def replicate(self, out_len: int, source: RandomSource) -> Replicate:
        return Replicate(self.draw(out_len, source.generator()), self.spec, source.key)
