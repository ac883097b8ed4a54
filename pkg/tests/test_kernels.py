import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from latfrac.errors import ArgumentError
from latfrac.kernels import (KernelKind, atangana_baleanu, caputo_dzhrbashyan, caputo_fabrizio,
                             check_admissibility, cumulative_integral, custom_kernel, laplace_transform)


def quad_laplace(g, p):
    """Laplace transform by adaptive quadrature, splitting off the integrable singularity at 0."""
    a, _ = integrate.quad(lambda t: math.exp(-p * t) * g(t), 0, 1, limit=400, epsabs=1e-13, epsrel=1e-11)
    b, _ = integrate.quad(lambda t: math.exp(-p * t) * g(t), 1, np.inf, limit=400, epsabs=1e-13, epsrel=1e-11)
    return a + b


KERNELS = [caputo_dzhrbashyan(0.5), caputo_dzhrbashyan(0.8), caputo_fabrizio(0.5, 1.3),
           caputo_fabrizio(0.3), atangana_baleanu(0.6), atangana_baleanu(0.4, 2.0)]


@pytest.mark.parametrize("k", KERNELS, ids=lambda k: k.name)
@pytest.mark.parametrize("p", [0.3, 1.0, 4.0])
def test_symbol_matches_quadrature(k, p):
    ref = quad_laplace(lambda t: float(k.density(t)), p)
    assert laplace_transform(k, p) == pytest.approx(ref, rel=1e-7)


@pytest.mark.parametrize("k", KERNELS, ids=lambda k: k.name)
@pytest.mark.parametrize("t", [1e-3, 0.4, 2.0])
def test_cumulative_matches_quadrature(k, t):
    ref, _ = integrate.quad(lambda s: float(k.density(s)), 0, t, limit=400, epsabs=1e-14, epsrel=1e-12)
    assert cumulative_integral(k, t) == pytest.approx(ref, rel=1e-8)


def test_cd_closed_forms():
    k = caputo_dzhrbashyan(0.5)
    assert laplace_transform(k, 4.0) == pytest.approx(0.5, rel=1e-15)
    assert cumulative_integral(k, 1.0) == pytest.approx(1 / math.gamma(1.5), rel=1e-15)


def test_cf_closed_forms():
    k = caputo_fabrizio(0.5, 2.0)
    # M/(1-a)/(p+c) with c = 1
    assert laplace_transform(k, 1.0) == pytest.approx(2.0, rel=1e-15)
    assert k.rate == 1.0


@given(st.floats(0.05, 0.95), st.floats(1e-3, 10.0))
def test_cd_density_identity(alpha, t):
    k = caputo_dzhrbashyan(alpha)
    assert float(k.density(t)) == pytest.approx(t ** (-alpha) / math.gamma(1 - alpha), rel=1e-12)
    # G' = g checked by a centred difference
    h = 1e-6 * t
    dG = (cumulative_integral(k, t + h) - cumulative_integral(k, t - h)) / (2 * h)
    assert dG == pytest.approx(float(k.density(t)), rel=1e-5)


def test_custom_matches_cd():
    cd = caputo_dzhrbashyan(0.4)
    c = custom_kernel(lambda p: p ** (-0.6), density=lambda t: t ** (-0.4) / math.gamma(0.6))
    assert c.kind == KernelKind.CUSTOM
    p = np.logspace(-2, 2, 9)
    assert np.allclose(laplace_transform(c, p), laplace_transform(cd, p), rtol=1e-14)
    assert cumulative_integral(c, 0.7) == pytest.approx(cumulative_integral(cd, 0.7), rel=1e-8)


def test_custom_without_density():
    c = custom_kernel(lambda p: 1 / p)
    with pytest.raises(ArgumentError):
        c.density(1.0)


@pytest.mark.parametrize("make", [lambda: caputo_dzhrbashyan(0.0), lambda: caputo_dzhrbashyan(1.0),
                                  lambda: caputo_fabrizio(0.5, -1.0), lambda: atangana_baleanu(1.2),
                                  lambda: custom_kernel(None)])
def test_invalid_kernels(make):
    with pytest.raises(ArgumentError):
        make()


def test_domain_errors():
    k = caputo_dzhrbashyan(0.5)
    with pytest.raises(ArgumentError):
        laplace_transform(k, 0.0)
    with pytest.raises(ArgumentError):
        cumulative_integral(k, -1.0)


@pytest.mark.parametrize("k", KERNELS, ids=lambda k: k.name)
def test_builtin_kernels_admissible_structure(k):
    rep = check_admissibility(k)
    assert rep.positive and rep.nonincreasing and rep.p_symbol_increasing and rep.completely_monotone
    assert rep.passed and rep.as_dict()["passed"]


def test_cd_limits():
    rep = check_admissibility(caputo_dzhrbashyan(0.5))
    assert rep.decay_at_infinity and rep.growth_at_infinity and rep.blowup_at_zero and rep.vanishing_at_zero


def test_cf_symbol_bounded_at_zero():
    rep = check_admissibility(caputo_fabrizio(0.5))
    assert not rep.blowup_at_zero


def test_nonmonotone_symbol_fails():
    bad = custom_kernel(lambda p: (2 + np.sin(p)) / p)
    rep = check_admissibility(bad)
    assert not rep.passed


def test_negative_symbol_fails():
    rep = check_admissibility(custom_kernel(lambda p: p ** (-0.5) - 0.5))
    assert not rep.positive and not rep.passed
