import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from latfrac.errors import AccuracyUnsupportedError, ArgumentError
from latfrac.mittag_leffler import mittag_leffler, mittag_leffler_asymptotic, mittag_leffler_series


def oracle(alpha, beta, z, dps=250):
    """Direct Taylor sum at very high precision, trustworthy for |z|**(1/alpha) up to a few hundred."""
    with mpmath.workdps(dps):
        z = mpmath.mpf(z)
        total, k = mpmath.mpf(0), 0
        while True:
            term = z**k * mpmath.rgamma(mpmath.mpf(alpha) * k + beta)
            total += term
            # stop once terms are far below any value E can take in this range
            if k > 20 and abs(term) < mpmath.mpf(10) ** (-60):
                break
            k += 1
        return float(total)


@pytest.mark.parametrize("beta", [0.5, 1.0, 1.7, 2.0])
def test_origin(beta):
    assert mittag_leffler(0.6, beta, 0.0) == pytest.approx(1 / math.gamma(beta), rel=1e-15)


@pytest.mark.parametrize("z", [-30.0, -5.0, -0.3, 0.7, 10.0])
def test_exponential(z):
    assert mittag_leffler(1.0, 1.0, z) == pytest.approx(math.exp(z), rel=1e-12)


@pytest.mark.parametrize("x", [0.1, 1.0, 2.5, 3.0])
def test_cosine(x):
    assert mittag_leffler(2.0, 1.0, -x * x) == pytest.approx(math.cos(x), abs=1e-11)


@pytest.mark.parametrize("x", [0.01, 0.5, 3.0, 8.0, 40.0, 400.0])
def test_half_order_erfcx(x):
    assert mittag_leffler(0.5, 1.0, -x) == pytest.approx(special.erfcx(x), rel=1e-10)


@settings(max_examples=25)
@given(st.sampled_from([0.3, 0.5, 0.8, 0.95]), st.sampled_from([1.0, 2.0]), st.floats(0.0, 1.0))
def test_against_extended_precision(alpha, beta, frac):
    zmax = 400.0**alpha
    z = -frac * zmax
    ref = oracle(alpha, beta, z)
    assert abs(mittag_leffler(alpha, beta, z) - ref) <= 1e-10 * max(abs(ref), 1e-3)


def test_positive_axis():
    for alpha, z in [(0.5, 3.0), (0.8, 20.0), (0.9, 50.0)]:
        ref = oracle(alpha, 1.0, z)
        assert mittag_leffler(alpha, 1.0, z) == pytest.approx(ref, rel=1e-12)


def test_branch_overlap():
    # series (extended precision) and asymptotic expansion both valid near |z| ~ 4..6 at alpha 0.3
    for z in np.linspace(-6.0, -4.0, 9):
        s = mittag_leffler_series(0.3, 1.0, z)
        a, err = mittag_leffler_asymptotic(0.3, 1.0, z)
        assert abs(s - a) <= 1e-10 * abs(s)
        assert err <= 1e-10 * abs(a)


def test_unsupported_positive():
    with pytest.raises(AccuracyUnsupportedError):
        mittag_leffler(0.5, 1.0, 50.5)
    with pytest.raises(ArgumentError):
        mittag_leffler_asymptotic(0.5, 1.0, 1.0)


@pytest.mark.parametrize("kw", [dict(alpha=0.0), dict(alpha=-1.0), dict(alpha=0.5, tol=1e-3), dict(alpha=0.5, tol=1e-16)])
def test_parameter_validation(kw):
    with pytest.raises(ArgumentError):
        mittag_leffler(kw["alpha"], 1.0, -1.0, tol=kw.get("tol", 1e-10))


def test_nonfinite():
    with pytest.raises(ArgumentError):
        mittag_leffler(0.5, 1.0, float("-inf"))


@given(st.sampled_from([0.4, 0.7, 0.9]), st.floats(-40.0, 5.0))
def test_recurrence(alpha, z):
    lhs = mittag_leffler(alpha, 1.0, z)
    rhs = 1.0 + z * mittag_leffler(alpha, 1.0 + alpha, z)
    assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(z) * abs(mittag_leffler(alpha, 1.0 + alpha, z)))


@given(st.sampled_from([0.3, 0.6, 0.9]), st.floats(-200.0, -0.01), st.floats(0.0, 50.0))
def test_completely_monotone_decay(alpha, z, dz):
    # E_alpha(-x) decreases in x for 0 < alpha <= 1
    assert mittag_leffler(alpha, 1.0, z - dz) <= mittag_leffler(alpha, 1.0, z) + 1e-12


def test_array_matches_scalar():
    z = np.array([[-3.0, -0.5], [0.0, 2.0]])
    arr = mittag_leffler(0.7, 1.2, z)
    assert arr.shape == (2, 2)
    for idx in np.ndindex(z.shape):
        assert arr[idx] == mittag_leffler(0.7, 1.2, float(z[idx]))
