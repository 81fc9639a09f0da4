"""Acceptance criteria 1-13; each test prints one PASS/FAIL line.

Two criteria cannot hold as stated. Their tests check the implementation
against an exact oracle (so the suite stays green), record FAIL, and pin
the offending case with a strict xfail.
"""

import math
import warnings

import numpy as np
import pytest

from jpr.bootstrap import BootstrapSpec, stationary_indices
from jpr.cli import main
from jpr.decompose import classical_decompose
from jpr.errors import BootstrapSizeWarning
from jpr.forecasters import ForecasterSpec
from jpr.harness import ExperimentConfig, generate_synthetic, rolling_eval
from jpr.numerics import chi_square_quantile
from jpr.regions import (
    bonferroni_levels,
    bootstrap_prediction_errors,
    build_region,
    contains,
    geometric_width,
    kfwe_multipliers,
    np_discard_count,
    np_heuristic_region,
    scheffe_multipliers,
)
from jpr.rng import RandomSource, make_rng
from jpr.series import k_max, k_min, ljung_box

pytestmark = pytest.mark.filterwarnings("ignore::jpr.errors.BootstrapSizeWarning")

# Printed table of Bonferroni-corrected marginal levels, rows alpha, columns H.
TABLE_ALPHAS = (0.1, 0.2, 0.3)
TABLE_H = (6, 12, 18, 24)
TABLE_PRINTED = {
    0.1: (0.983, 0.991, 0.994, 0.995),
    0.2: (0.966, 0.983, 0.988, 0.991),
    0.3: (0.95, 0.975, 0.980, 0.987),
}
TABLE_TYPO = (0.3, 18)  # 1 - 0.3/18 = 0.98333, printed 0.980


# -- 1 ---------------------------------------------------------------------------------------


def _table_cells():
    for a in TABLE_ALPHAS:
        for H, printed in zip(TABLE_H, TABLE_PRINTED[a]):
            marks = ()
            if (a, H) == TABLE_TYPO:
                marks = pytest.mark.xfail(strict=True, reason="printed 0.980; exact level is 0.98333")
            yield pytest.param(a, H, printed, marks=marks, id=f"a{a}-H{H}")


@pytest.mark.parametrize("alpha,H,printed", list(_table_cells()))
def test_bonferroni_table_cell(alpha, H, printed):
    assert bonferroni_levels(alpha, H)[0] == pytest.approx(printed, abs=1e-3)


def test_criterion_01_bonferroni_table(record_criterion):
    misses = []
    for a in TABLE_ALPHAS:
        for H, printed in zip(TABLE_H, TABLE_PRINTED[a]):
            got = bonferroni_levels(a, H)
            assert np.all(got == got[0])
            assert got[0] == pytest.approx(1 - a / H, rel=1e-15)  # exact oracle
            if abs(got[0] - printed) > 1e-3:
                misses.append(f"(alpha={a}, H={H}) exact {got[0]:.5f} vs printed {printed:.3f}")
    assert [m.split(")")[0] for m in misses] == ["(alpha=0.3, H=18"]
    record_criterion(
        1, "Bonferroni table", not misses,
        f"{12 - len(misses)}/12 cells match; unattainable cell {misses[0]}" if misses else "12/12 cells",
    )


# -- 2 ---------------------------------------------------------------------------------------


def test_criterion_02_order_statistic_oracle(record_criterion):
    gen = np.random.default_rng(2)
    bad = 0
    for _ in range(10_000):
        n = int(gen.integers(1, 13))
        v = gen.integers(-5, 6, size=n).astype(float)  # small integer range: plenty of ties
        k = int(gen.integers(1, n + 1))
        full = sorted(v.tolist())
        bad += k_max(v, k) != full[n - k] or k_min(v, k) != full[k - 1]
    record_criterion(2, "order-statistic oracle", bad == 0, f"{bad} mismatches in 10^4 vectors")
    assert bad == 0


# -- 3 ---------------------------------------------------------------------------------------


def test_criterion_03_multiplier_monotone_in_k(record_criterion):
    gen = np.random.default_rng(3)
    bad = 0
    for _ in range(100):
        S = gen.standard_t(5, size=(500, 24))
        ms = [kfwe_multipliers(S, k, 0.1) for k in range(1, 25)]
        for a, b in zip(ms, ms[1:]):
            bad += b.d_abs_kmax > a.d_abs_kmax or b.d_kmax > a.d_kmax or b.d_kmin < a.d_kmin
    record_criterion(3, "multiplier monotonicity in k", bad == 0, f"{bad} violations over 100 matrices, k=1..24")
    assert bad == 0


# -- 4 ---------------------------------------------------------------------------------------


def test_criterion_04_gaussian_sanity(record_criterion):
    inside = 0
    for seed in range(50):
        S = make_rng(seed, 4).normal(size=(5000, 1))
        inside += 1.55 <= kfwe_multipliers(S, 1, 0.1).d_abs_kmax <= 1.75
    ok = inside >= 0.95 * 50
    record_criterion(4, "Gaussian sanity", ok, f"{inside}/50 seeds with d in [1.55, 1.75]")
    assert ok


# -- 5 ---------------------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_05_desk_scale_coverage(record_criterion, ar1_series):
    trials, hits = 200, 0
    spec, boot_spec = ForecasterSpec(p=1), BootstrapSpec("model")
    for trial in range(trials):
        y = ar1_series(10_000 + trial, n=206)
        boot = bootstrap_prediction_errors(y[:200], spec, boot_spec, 6, 500, RandomSource(5, (trial,)))
        hits += contains(build_region("kfwe", boot, 6, 0.1, 1), y[200:], 1)[0]
    cover = hits / trials
    ok = 0.84 <= cover <= 0.96
    record_criterion(5, "desk-scale coverage", ok, f"1-FWE coverage {cover:.3f} over {trials} trials (band [0.84, 0.96])")
    assert ok


# -- 6 ---------------------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_06_width_orderings(record_criterion):
    cfg = ExperimentConfig(
        B=1000, seed=2024, n_windows=20, step=50,
        forecaster=ForecasterSpec("ar", p=2, D=1, period=30),
        bootstrap=BootstrapSpec("model"),
        methods=("kfwe", "bonferroni"),
    )
    rep = rolling_eval(generate_synthetic(), cfg)

    def w(method, a, k, H):
        return rep.cells[(method, a, k, H)].mean_geometric_width

    k_bad = sum(
        not (w("kfwe", a, 1, H) >= w("kfwe", a, 2, H) >= w("kfwe", a, 3, H))
        for a in cfg.alpha_list for H in cfg.H_list
    )
    a_bad = sum(
        w("kfwe", a1, k, H) < w("kfwe", a2, k, H)
        for a1, a2 in zip(cfg.alpha_list, cfg.alpha_list[1:]) for k in cfg.k_list for H in cfg.H_list
    )
    bonf = sum(w("bonferroni", a, 1, H) >= w("kfwe", a, 1, H) for a in cfg.alpha_list for H in cfg.H_list)
    cells = len(cfg.alpha_list) * len(cfg.H_list)
    ok = k_bad == 0 and a_bad == 0 and bonf >= 0.9 * cells
    record_criterion(
        6, "width orderings", ok,
        f"k-order violations {k_bad}, alpha-order violations {a_bad}, Bonferroni wider in {bonf}/{cells} cells",
    )
    assert ok


# -- 7 ---------------------------------------------------------------------------------------


@pytest.mark.parametrize(
    "alpha",
    [0.1, 0.2, pytest.param(0.3, marks=pytest.mark.xfail(strict=True, reason="v_1 < v_2 < v_3 at alpha 0.3"))],
)
def test_scheffe_multiplier_strictly_decreasing(alpha):
    assert np.all(np.diff(scheffe_multipliers(alpha, 24)) < 0)


def test_criterion_07_scheffe_multiplier(record_criterion):
    h = np.arange(1, 25)
    closed = max(
        abs(chi_square_quantile(2, p) - (-2.0 * math.log1p(-p)))
        for p in np.linspace(0.001, 0.999, 999)
    )
    assert closed <= 1e-6
    failing = []
    for a in (0.1, 0.2, 0.3):
        v = scheffe_multipliers(a, 24)
        # exact oracle: the chi-square quantile recomputed per h
        oracle = np.sqrt([chi_square_quantile(int(d), 1 - a) / d for d in h])
        np.testing.assert_allclose(v, oracle, rtol=1e-12)
        if not np.all(np.diff(v) < 0):
            rise = np.flatnonzero(np.diff(v) >= 0) + 1
            failing.append(f"alpha={a} rises at h={rise.min()}..{rise.max() + 1} ({v[0]:.4f} -> {v[1]:.4f})")
    assert [f.split()[0] for f in failing] == ["alpha=0.3"]
    record_criterion(
        7, "Scheffe multiplier", not failing,
        f"chi2 df=2 closed form max err {closed:.1e}; strictly decreasing at alpha 0.1, 0.2; "
        f"unattainable: {'; '.join(failing)}",
    )


# -- 8 ---------------------------------------------------------------------------------------


def test_criterion_08_np_counting(record_criterion):
    bad = 0
    gen = np.random.default_rng(8)
    for B in (10, 100, 1000):
        for a in (0.1, 0.2, 0.3):
            paths = gen.normal(size=(B, 6))
            reg = np_heuristic_region(np.zeros(6), paths, a)
            dist = np.linalg.norm(paths, axis=1)
            kept = np.lexsort((np.arange(B), dist))[: B - math.ceil(round(a * B, 9))]
            bad += np_discard_count(a, B) != math.ceil(round(a * B, 9))
            bad += kept.size != B - math.ceil(round(a * B, 9))
            bad += not np.all((paths[kept] >= reg.lower) & (paths[kept] <= reg.upper))
            bad += not (np.array_equal(reg.lower, paths[kept].min(0)) and np.array_equal(reg.upper, paths[kept].max(0)))
    record_criterion(8, "NP counting", bad == 0, f"{bad} violations over B in (10, 100, 1000), alpha in (0.1, 0.2, 0.3)")
    assert bad == 0


# -- 9 ---------------------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_09_np_width_grows_with_B(record_criterion, ar1_series):
    y = ar1_series(77)
    wins = 0
    for s in range(50):
        w = {}
        for B in (100, 1000):
            boot = bootstrap_prediction_errors(y, ForecasterSpec(p=1), BootstrapSpec("model"), 6, B, RandomSource(s))
            w[B] = np.mean([geometric_width(build_region("np", boot, 6, a)) for a in (0.1, 0.2, 0.3)])
        wins += w[1000] > w[100]
    ok = wins >= 0.8 * 50
    record_criterion(9, "NP width growth with B", ok, f"B=1000 wider in {wins}/50 seeds")
    assert ok


# -- 10 --------------------------------------------------------------------------------------


def test_criterion_10_decomposition_reconstruction(record_criterion):
    gen = np.random.default_rng(10)
    worst = 0.0
    for _ in range(100):
        period = int(gen.integers(2, 25))
        n = int(gen.integers(2 * period + 1, 400))
        y = gen.normal(size=n).cumsum() + 10 * np.sin(2 * np.pi * np.arange(n) / period)
        d = classical_decompose(y, period)
        worst = max(worst, float(np.max(np.abs(d.trend + d.seasonal + d.remainder - y))))
    ok = worst <= 1e-9
    record_criterion(10, "decomposition reconstruction", ok, f"max error {worst:.1e} over 100 series")
    assert ok


# -- 11 --------------------------------------------------------------------------------------


def test_criterion_11_stationary_block_law(record_criterion):
    mean_block, n = 6.0, 10**9  # huge n: a fresh start lands on prev+1 with probability 1e-9
    idx = stationary_indices(n, mean_block, 700_000, make_rng(11, 0))
    breaks = np.flatnonzero(np.diff(idx) != 1)
    lengths = np.diff(np.concatenate(([-1], breaks)))  # completed blocks only
    got = lengths.mean()
    ok = lengths.size >= 10**5 and abs(got / mean_block - 1) <= 0.05
    record_criterion(11, "stationary block law", ok, f"mean length {got:.3f} vs {mean_block} over {lengths.size} blocks")
    assert ok


# -- 12 --------------------------------------------------------------------------------------


def test_criterion_12_ljung_box_calibration(record_criterion):
    gen = make_rng(12, 0)
    reps = 5000
    rejects = sum(ljung_box(gen.normal(size=1000), 10)[1] < 0.05 for _ in range(reps))
    rate = rejects / reps
    ok = 0.03 <= rate <= 0.07
    record_criterion(12, "portmanteau calibration", ok, f"rejection rate {rate:.4f} (band [0.03, 0.07])")
    assert ok


# -- 13 --------------------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_13_evaluate_determinism(record_criterion, tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text(
        "B = 200\nseed = 13\nwindow_len = 600\nstep = 25\nn_windows = 12\nH = 6,12\nk = 1,2\n"
        "alpha = 0.1,0.3\nmethods = kfwe,bonferroni,bh,sidak,scheffe,np\n"
        "model = ar\np = 2\nD = 1\nperiod = 30\nbootstrap = circular\nblock_len = 12\n"
    )
    outs = []
    for run, threads in enumerate(("1", "1", "4")):
        out = tmp_path / f"report{run}.csv"
        assert main(["evaluate", str(cfg), "--threads", threads, "--output", str(out)]) == 0
        outs.append(out.read_bytes())
    ok = outs[0] == outs[1] == outs[2]
    record_criterion(
        13, "EVALUATE determinism", ok,
        f"{len(outs[0].splitlines()) - 1} rows byte-identical across two runs and --threads 1 vs 4",
    )
    assert ok
