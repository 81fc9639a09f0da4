from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats
from scipy.signal import lfilter

from jpr.bootstrap import (
    BootstrapPlan,
    BootstrapSpec,
    block_of_blocks,
    block_of_blocks_indices,
    circular_block,
    circular_block_indices,
    decomposed_block,
    default_block_length,
    fit_sieve,
    model_based,
    moving_block,
    moving_block_indices,
    sieve_bootstrap,
    stationary_block_lengths,
    stationary_bootstrap,
)
from jpr.decompose import classical_decompose, recompose
from jpr.errors import BlockLengthError, MeanBlockError
from jpr.forecasters import fit_ar
from jpr.rng import RandomSource
from jpr.series import acf


def gen(seed=0):
    return np.random.default_rng(seed)


def ar1(seed, n, rho=0.8):
    e = gen(seed).normal(size=n + 200)
    return lfilter([1.0], [1.0, -rho], e)[200:]


@pytest.mark.parametrize("n,want", [(1000, 10), (27, 3), (1, 1)])
def test_default_block_length(n, want):
    assert default_block_length(n) == want


# -- moving / circular ---------------------------------------------------------------


def test_moving_block_full_length_block_copies_series():
    x = np.arange(10.0)
    for s in range(5):
        np.testing.assert_array_equal(moving_block(x, 10, 10, gen(s)).series, x)


def test_moving_block_candidate_starts():
    idx = moving_block_indices(6, 2, 2 * 4000, gen(1))
    starts = set(idx[::2].tolist())
    assert starts == {0, 1, 2, 3, 4}
    assert np.all(idx[1::2] == idx[::2] + 1)


def test_moving_block_invalid_length():
    with pytest.raises(BlockLengthError):
        moving_block(np.arange(5.0), 6, 10, gen())
    with pytest.raises(BlockLengthError):
        circular_block(np.arange(5.0), 0, 10, gen())


def test_circular_block_wraps():
    x = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    g = gen(2)
    for _ in range(50):
        idx = circular_block_indices(5, 5, 5, g)
        start = idx[0]
        np.testing.assert_array_equal(x[idx], np.roll(x, -start))
        if start == 2:
            np.testing.assert_array_equal(x[idx], [3, 4, 5, 1, 2])


def test_circular_block_starts_uniform():
    n = 7
    starts = circular_block_indices(n, 3, 3 * 100_000, gen(3))[::3]
    counts = np.bincount(starts, minlength=n)
    assert stats.chisquare(counts).pvalue > 0.01


def test_iid_resample_marginal_frequencies():
    x = np.arange(10.0)
    draws = moving_block(x, 1, 100_000, gen(4)).series
    counts = np.bincount(draws.astype(int), minlength=10)
    sd = np.sqrt(100_000 * 0.1 * 0.9)
    assert np.all(np.abs(counts - 10_000) <= 3 * sd)


def test_block_bootstrap_preserves_lag_one_dependence():
    x = ar1(5, 1000)
    r_src = acf(x, 1)[0]
    k = default_block_length(x.size)
    g = gen(6)
    blocked = np.mean([acf(moving_block(x, k, x.size, g).series, 1)[0] for _ in range(200)])
    iid = np.mean([acf(moving_block(x, 1, x.size, g).series, 1)[0] for _ in range(200)])
    assert abs(blocked - r_src) <= 0.1
    assert abs(iid) <= 0.05


# -- block of blocks -------------------------------------------------------------------


def test_block_of_blocks_needs_inner_shorter():
    with pytest.raises(BlockLengthError):
        block_of_blocks(np.arange(20.0), 4, 4, 20, gen())
    with pytest.raises(BlockLengthError):
        BootstrapSpec("block_of_blocks", outer_block=3, inner_block=5)


@pytest.mark.parametrize("k1,k2", [(5, 1), (6, 2), (7, 3)])
def test_block_of_blocks_stays_inside_outer_blocks(k1, k2):
    n = 30
    g = gen(7)
    for _ in range(200):
        idx = block_of_blocks_indices(n, k1, k2, 4 * k1, g)
        for chunk in idx.reshape(4, k1):
            assert chunk.max() - chunk.min() <= k1 - 1
            assert 0 <= chunk.min() and chunk.max() < n


def test_block_of_blocks_full_outer_is_moving_subblocks():
    n, k2 = 8, 3
    g = gen(8)
    seen = set()
    for _ in range(2000):
        idx = block_of_blocks_indices(n, n, k2, n, g)
        runs = [idx[i : i + k2] for i in range(0, n, k2)]
        for r in runs:
            assert np.all(np.diff(r) == 1)
            seen.add(int(r[0]))
    assert seen == set(range(n - k2 + 1))


# -- stationary --------------------------------------------------------------------------


def test_stationary_mean_block_length():
    lengths = stationary_block_lengths(5.0, 100_000, gen(9))
    assert 4.75 <= lengths.mean() <= 5.25
    assert lengths.min() >= 1


def test_stationary_mean_one_is_iid():
    assert np.all(stationary_block_lengths(1.0, 1000, gen(10)) == 1)


def test_stationary_invalid_mean():
    with pytest.raises(MeanBlockError):
        stationary_bootstrap(np.arange(10.0), 0.5, 10, gen())


def test_stationary_deterministic():
    x = ar1(11, 50)
    a = stationary_bootstrap(x, 4.0, 60, RandomSource(5, 3)).series
    b = stationary_bootstrap(x, 4.0, 60, RandomSource(5, 3)).series
    np.testing.assert_array_equal(a, b)


# -- length and support properties ------------------------------------------------------


@given(
    st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=40),
    st.integers(1, 80),
    st.integers(0, 2**32 - 1),
    st.sampled_from(["moving", "circular", "stationary"]),
)
def test_block_replicates_have_length_and_source_values(v, out_len, seed, scheme):
    x = np.array(v)
    k = max(1, len(v) // 3)
    g = gen(seed)
    if scheme == "moving":
        rep = moving_block(x, k, out_len, g)
    elif scheme == "circular":
        rep = circular_block(x, k, out_len, g)
    else:
        rep = stationary_bootstrap(x, float(k), out_len, g)
    assert len(rep) == out_len
    assert set(rep.series.tolist()) <= set(x.tolist())


@given(st.integers(0, 2**32 - 1), st.integers(0, 1000))
def test_same_stream_same_replicate(seed, stream):
    x = ar1(1, 60)
    a = circular_block(x, 4, 70, RandomSource(seed, stream))
    b = circular_block(x, 4, 70, RandomSource(seed, stream))
    np.testing.assert_array_equal(a.series, b.series)
    assert a.stream_id == (stream,)


# -- sieve / model --------------------------------------------------------------------------


def test_sieve_auto_order_small_for_ar1():
    small = sum(fit_sieve(ar1(s, 300, 0.5)).p <= 3 for s in range(50))
    assert small >= 40


def test_sieve_replicate_length():
    x = ar1(12, 120, 0.5)
    assert len(sieve_bootstrap(x, None, 126, gen(12))) == 126


def test_sieve_zero_residual_fit_follows_recursion():
    y = np.empty(30)
    y[0] = 10.0
    for t in range(1, 30):
        y[t] = 1.0 + 0.5 * y[t - 1]
    model = fit_ar(y, 1)[0]
    rep = sieve_bootstrap(y, 1, 8, gen(13)).series
    np.testing.assert_allclose(rep, model.forecast(8).point, atol=1e-9)


def test_model_based_jitter_sd():
    # Constant residuals centre to zero, so the output is intercept + jitter.
    y = np.full(40, 2.0)
    model = fit_ar(y, 0)[0]
    plain = model_based(model, 1000, gen(14)).series
    jittered = model_based(model, 20_000, gen(14), noise_sd=0.5).series
    assert np.ptp(plain) < 1e-12
    assert jittered.std() == pytest.approx(0.5, rel=0.03)


def test_model_based_distinct_streams_differ():
    model = fit_ar(ar1(15, 200, 0.5), 1)[0]
    a = model_based(model, 50, RandomSource(1, 0)).series
    b = model_based(model, 50, RandomSource(1, 1)).series
    assert not np.array_equal(a, b)


# -- decomposed -------------------------------------------------------------------------------


def _trend_season(m=6, n=60):
    t = np.arange(n)
    pattern = np.array([2.0, -1.0, 0.5, 1.0, -2.0, -0.5])[:m]
    return 3 + 0.2 * t + pattern[t % m]


def test_decomposed_zero_remainder_is_deterministic_extension():
    x = _trend_season()
    dec = classical_decompose(x, 6)
    np.testing.assert_allclose(dec.remainder, 0, atol=1e-12)
    rep = decomposed_block(x, 6, "moving", 4, 12, gen(16)).series
    base = recompose(dec, np.zeros(72), 12)
    np.testing.assert_allclose(rep, base, atol=1e-12)
    t = np.arange(60, 72)
    np.testing.assert_allclose(rep[60:], _trend_season(n=72)[t], atol=1e-9)


@pytest.mark.parametrize("inner", ["moving", "stationary"])
def test_decomposed_replicate_is_baseline_plus_resampled_remainder(inner):
    x = _trend_season() + gen(17).normal(size=60)
    dec = classical_decompose(x, 6)
    rep = decomposed_block(x, 6, inner, 5, 10, gen(18), decomposition=dec)
    assert len(rep) == 70
    diff = rep.series - recompose(dec, np.zeros(70), 10)
    src = dec.remainder
    assert all(np.min(np.abs(src - d)) < 1e-9 for d in diff)


def test_decomposed_spec_needs_period():
    with pytest.raises(ValueError):
        BootstrapSpec("decomposed")


# -- plans ---------------------------------------------------------------------------------------


@pytest.mark.parametrize(
    "spec",
    [
        BootstrapSpec("moving"),
        BootstrapSpec("circular", block_len=3),
        BootstrapSpec("block_of_blocks", outer_block=8, inner_block=3),
        BootstrapSpec("stationary", mean_block=3.0),
        BootstrapSpec("sieve"),
        BootstrapSpec("decomposed", period=6, inner_scheme="stationary"),
        BootstrapSpec("moving", block_len=4, smoothing_noise_sd=0.2),
    ],
)
def test_plan_replicates_thread_independent(spec):
    x = _trend_season() + gen(19).normal(size=60)
    plan = BootstrapPlan(x, spec)
    sources = [RandomSource(9, (0, b)) for b in range(16)]
    serial = [plan.replicate(66, s).series for s in sources]
    with ThreadPoolExecutor(max_workers=4) as pool:
        threaded = list(pool.map(lambda s: plan.replicate(66, s).series, reversed(sources)))[::-1]
    for a, b in zip(serial, threaded):
        assert a.size == 66
        np.testing.assert_array_equal(a, b)


def test_plan_model_scheme_needs_model():
    with pytest.raises(ValueError):
        BootstrapPlan(np.arange(10.0), BootstrapSpec("model"))


def test_plan_fills_default_block_length():
    plan = BootstrapPlan(np.arange(125.0), BootstrapSpec("moving"))
    assert plan.spec.block_len == 5
