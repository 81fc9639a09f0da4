import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from jpr.errors import NotPositiveDefiniteError, NotSymmetricError, ProbabilityOutOfRangeError
from jpr.numerics import chi_square_cdf, chi_square_quantile, cholesky, regularized_gamma_p, solve_lower


def chi2_by_quadrature(df, p):
    """Bisection on a numerically integrated chi-square density."""
    dens = lambda x: x ** (df / 2 - 1) * math.exp(-x / 2) / (2 ** (df / 2) * math.gamma(df / 2))
    lo, hi = 0.0, 100.0
    for _ in range(80):
        mid = (lo + hi) / 2
        if integrate.quad(dens, 0, mid)[0] < p:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def test_chi_square_df1_against_quadrature():
    assert chi_square_quantile(1, 0.95) == pytest.approx(chi2_by_quadrature(1, 0.95), abs=1e-3)
    assert chi_square_quantile(1, 0.95) == pytest.approx(3.8415, abs=1e-3)


def test_chi_square_df2_closed_form():
    assert chi_square_quantile(2, 0.95) == pytest.approx(-2 * math.log(0.05), abs=1e-8)


def test_chi_square_small_p_goes_to_zero():
    assert chi_square_quantile(1, 1e-12) < 1e-20


def test_chi_square_p_out_of_range():
    for p in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(ProbabilityOutOfRangeError):
            chi_square_quantile(3, p)


@pytest.mark.parametrize("df", [1, 2, 3, 5, 10, 24, 60])
@pytest.mark.parametrize("p", [0.01, 0.1, 0.5, 0.7, 0.9, 0.95, 0.999])
def test_chi_square_quantile_against_scipy(df, p):
    assert chi_square_quantile(df, p) == pytest.approx(stats.chi2.ppf(p, df), abs=1e-8, rel=1e-10)


@given(st.floats(0.1, 50), st.floats(0.0, 200))
def test_regularized_gamma_against_scipy(a, x):
    from scipy import special

    assert regularized_gamma_p(a, x) == pytest.approx(special.gammainc(a, x), abs=1e-12)


@given(st.integers(1, 40), st.floats(0.01, 0.99))
def test_chi_square_cdf_inverts_quantile(df, p):
    assert chi_square_cdf(chi_square_quantile(df, p), df) == pytest.approx(p, abs=1e-10)


@given(st.integers(1, 30), st.floats(0.01, 0.98), st.floats(0.001, 0.01))
def test_chi_square_quantile_strictly_increasing(df, p, dp):
    q = chi_square_quantile(df, p)
    assert chi_square_quantile(df, p + dp) > q
    assert chi_square_quantile(df + 1, p) > q


def test_cholesky_examples():
    np.testing.assert_array_equal(cholesky(np.eye(3)), np.eye(3))
    np.testing.assert_allclose(cholesky([[4, 2], [2, 3]]), [[2, 0], [1, math.sqrt(2)]], atol=1e-15)
    with pytest.raises(NotPositiveDefiniteError):
        cholesky([[1, 2], [2, 1]])
    with pytest.raises(NotSymmetricError):
        cholesky([[1, 0.5], [0.4, 1]])


@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_cholesky_reconstructs(n, seed):
    gen = np.random.default_rng(seed)
    M = gen.normal(size=(n, n))
    A = M @ M.T + n * np.eye(n)
    L = cholesky(A)
    assert np.allclose(L, np.tril(L))
    assert np.all(np.diag(L) > 0)
    assert np.abs(L @ L.T - A).max() <= 1e-9 * max(1.0, np.abs(A).max())
    np.testing.assert_allclose(L, np.linalg.cholesky(A), atol=1e-10)


def test_solve_lower():
    L = np.array([[2.0, 0, 0], [1, 3, 0], [-1, 2, 4]])
    b = np.array([1.0, 2, 3])
    np.testing.assert_allclose(solve_lower(L, b), np.linalg.solve(L, b), atol=1e-14)
