import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from latfrac.errors import ArgumentError, InvalidCoefficientError
from latfrac.kernels import caputo_dzhrbashyan
from latfrac.l1 import uniform_grid
from latfrac.solver import CoefficientProfile, SourceTerm, solve_full
from latfrac.spectral import SpectralDecomposition
from latfrac.veryweak import (Atom, DistributionalCoefficient, DistributionalSource, EpsilonSchedule, Jump,
                              Mollifier, ResolutionWarning, TimeDistribution, consistency_experiment,
                              moderateness_fit, mollifier_constant, negligibility_check, refine_grid,
                              regularize, resolve_grid, uniqueness_experiment, veryweak_solve)

CD = caputo_dzhrbashyan(0.5)
SCHED = EpsilonSchedule()
SHORT = EpsilonSchedule.geometric(3, 8)


@pytest.fixture(scope="module")
def one_mode():
    return SpectralDecomposition(np.array([1.0]), np.eye(1))


def test_constant_against_mpmath():
    with mpmath.workdps(30):
        ref = 1 / mpmath.quad(lambda s: mpmath.exp(-1 / (1 - s * s)), [-1, 0, 1])
    assert mollifier_constant() == pytest.approx(float(ref), rel=1e-12)


@pytest.mark.parametrize("name", ["bump", "raised_cosine"])
def test_unit_mass(name):
    m = Mollifier(name)
    assert abs(m.integral() - 1) <= 1e-10
    val, _ = integrate.quad(lambda x: float(m.psi(x)), -1, 1, epsabs=1e-13)
    assert abs(val - 1) <= 1e-10


def test_bump_centre():
    c = mollifier_constant()
    assert float(Mollifier().psi(0.0)) == pytest.approx(c * math.exp(-1), rel=1e-15)


@given(st.floats(-1.5, 1.5))
def test_mollifier_shape(x):
    for m in (Mollifier(), Mollifier("raised_cosine")):
        v = float(m.psi(x))
        assert v >= 0 and v == float(m.psi(-x))
        if abs(x) >= 1:
            assert v == 0


@pytest.mark.parametrize("name", ["bump", "raised_cosine"])
@pytest.mark.parametrize("x", [-0.9, -0.3, 0.0, 0.45, 0.99, 1.2])
def test_step_matches_quadrature(name, x):
    m = Mollifier(name)
    ref, _ = integrate.quad(lambda s: float(m.psi(s)), -1, min(x, 1.0), epsabs=1e-14, limit=200)
    assert float(m.step(x)) == pytest.approx(ref, abs=1e-10)


@pytest.mark.parametrize("name", ["bump", "raised_cosine"])
def test_derivative_matches_differences(name):
    m = Mollifier(name)
    x = np.linspace(-0.95, 0.95, 39)
    h = 1e-6
    fd = (m.psi(x + h) - m.psi(x - h)) / (2 * h)
    assert np.allclose(m.dpsi(x), fd, atol=1e-6)


def test_unknown_mollifier():
    with pytest.raises(ArgumentError):
        Mollifier("gaussian")


def test_schedule():
    om = SCHED.omegas
    assert np.all(np.diff(om) < 0)
    for e, w in zip(SCHED.eps, om):
        assert math.exp(w ** (-SCHED.L1)) == pytest.approx(1 / e, rel=1e-12)
    two = EpsilonSchedule.geometric(1, 5, L1=2)
    assert two.omega(2**-4) == pytest.approx(math.log(16) ** -0.5)
    for bad in [dict(eps=(0.5, 0.6)), dict(eps=(1.0,)), dict(eps=(0.5,), L1=0), dict(eps=(0.5,), L1=1.5)]:
        with pytest.raises(ArgumentError):
            EpsilonSchedule(**bad)


def test_regularize_constant():
    a = regularize(DistributionalCoefficient(T=1.0, a0=1.7), 2**-5, SCHED)
    t = np.linspace(-0.5, 1.5, 101)
    assert np.max(np.abs(a(t) - 1.7)) <= 1e-12


def test_regularize_delta_peak():
    coeff = DistributionalCoefficient(T=1.0, atoms=(Atom(0.5, 1.0),))
    peaks = []
    for eps in SCHED.eps:
        om = SCHED.omega(eps)
        peak = float(regularize(coeff, eps, SCHED)(0.5))
        assert peak == pytest.approx(1 + mollifier_constant() * math.exp(-1) / om, rel=1e-13)
        peaks.append(peak)
    assert np.all(np.diff(peaks) > 0)


def test_regularize_jump_midpoint():
    coeff = DistributionalCoefficient(T=1.0, jumps=(Jump(0.4, 2.0),))
    a = regularize(coeff, 2**-3, SCHED)
    assert float(a(0.4)) == pytest.approx(2.0, abs=1e-14)
    # omega(2^-10) = 0.144, so both ends sit outside the transition layer
    a = regularize(coeff, 2**-10, SCHED)
    assert float(a(0.0)) == pytest.approx(1.0, abs=1e-14) and float(a(1.0)) == pytest.approx(3.0, abs=1e-14)


def test_regularize_rejects_foreign_eps():
    with pytest.raises(ArgumentError):
        regularize(DistributionalCoefficient(), 0.3, SCHED)


def test_distribution_validation():
    with pytest.raises(ArgumentError):
        DistributionalCoefficient(T=1.0, atoms=(Atom(1.5, 1.0),))
    with pytest.raises(ArgumentError):
        DistributionalCoefficient(T=1.0, atoms=(Atom(0.5, 1.0, order=2),))
    with pytest.raises(ArgumentError):
        DistributionalCoefficient(T=1.0, jumps=(Jump(-0.1, 1.0),))
    with pytest.raises(InvalidCoefficientError):
        DistributionalCoefficient(a0=0.0)


@settings(max_examples=30)
@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 3)), max_size=3),
       st.lists(st.tuples(st.floats(0, 1), st.floats(0, 3)), max_size=2),
       st.sampled_from(SCHED.eps), st.sampled_from(["bump", "raised_cosine"]))
def test_floor_preserved(atoms, jumps, eps, name):
    coeff = DistributionalCoefficient(T=1.0, smooth=lambda t: 1 + t * (1 - t), a0=1.0,
                                      atoms=tuple(Atom(p, w) for p, w in atoms),
                                      jumps=tuple(Jump(p, h) for p, h in jumps))
    a = regularize(coeff, eps, SCHED, Mollifier(name))
    assert np.min(a(np.linspace(0, 1, 801))) >= 1.0 - 1e-12


def test_moderateness_examples():
    eps = np.array(SCHED.eps)
    fit = moderateness_fit(eps, np.full(eps.size, 2.0))
    assert fit.N == 0 and fit.flags and fit.flags[0].startswith("degenerate")
    fit = moderateness_fit(eps, 0.7 * eps**-3.0)
    assert fit.N == 3 and fit.r2 >= 0.999
    coeff = DistributionalCoefficient(T=1.0, atoms=(Atom(0.5, 1.0),))
    sup = [float(np.max(regularize(coeff, e, SCHED)(np.linspace(0, 1, 2001)))) for e in SCHED.eps]
    fit = moderateness_fit(eps, sup)
    assert fit.N == 0 and 0 < fit.slope < 1 and any("slowly varying" in f for f in fit.flags)
    with pytest.raises(ArgumentError):
        moderateness_fit(eps[:3], [1, 2, 3])


def test_negligibility_examples():
    eps = np.array(SCHED.eps)
    assert negligibility_check(eps, np.zeros(eps.size)).all_passed
    rep = negligibility_check(eps, eps**2)
    assert rep.passed[1] and rep.passed[2] and not rep.passed[3]


def test_two_mollifiers_smooth_part():
    coeff = DistributionalCoefficient(T=1.0, a0=2.0)
    t = np.linspace(0, 1, 301)
    diffs = [np.max(np.abs(regularize(coeff, e, SCHED)(t) - regularize(coeff, e, SCHED, Mollifier("raised_cosine"))(t)))
             for e in SCHED.eps]
    assert max(diffs) <= 1e-12


def test_two_mollifiers_on_delta_not_negligible():
    # pointwise the two bumps differ at the peak by a multiple of 1/omega, which grows
    coeff = DistributionalCoefficient(T=1.0, atoms=(Atom(0.5, 1.0),))
    t = np.linspace(0, 1, 4001)
    diffs = [np.max(np.abs(regularize(coeff, e, SCHED)(t) - regularize(coeff, e, SCHED, Mollifier("raised_cosine"))(t)))
             for e in SCHED.eps]
    assert not negligibility_check(SCHED.eps, diffs).passed[1]


def test_grid_refinement():
    t = uniform_grid(1.0, 16)
    r = refine_grid(t, [0.5], 0.05, 8)
    assert np.count_nonzero(np.abs(r - 0.5) <= 0.05) >= 8 and np.all(np.isin(t, r))
    coeff = DistributionalCoefficient(T=1.0, atoms=(Atom(0.5, 1.0),))
    with pytest.warns(ResolutionWarning):
        r2, notes = resolve_grid(t, coeff, [2**-10], SCHED)
    assert notes and r2.size > t.size
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        r3, notes = resolve_grid(uniform_grid(1.0, 512), coeff, SCHED.eps, SCHED)
    assert not notes and r3.size == 513


def test_regular_family_matches_classical(dec_small):
    u0 = dec_small.U[:, :4] @ np.array([1.0, -0.5, 0.3, 0.2])
    t = uniform_grid(1.0, 64)
    fam = veryweak_solve(CD, dec_small, DistributionalCoefficient(T=1.0, a0=1.5), None, u0, SHORT, t)
    ref = solve_full(CD, dec_small, CoefficientProfile.constant(1.5, 1.0), u0, None, t)
    for m in fam.members:
        assert np.max(np.abs(m.field.modes - ref.modes)) <= 1e-12
    assert moderateness_fit(fam.eps, fam.sol_norms).N == 0


def test_delta_family_bounded(one_mode):
    coeff = DistributionalCoefficient(T=1.0, atoms=(Atom(0.5, 1.0),))
    fam = veryweak_solve(CD, one_mode, coeff, None, np.array([1.0]), SCHED, uniform_grid(1.0, 256))
    sups = np.array([np.max(np.abs(m.field.modes)) for m in fam.members])
    assert np.all(sups <= 1 + 1e-8)
    fit = moderateness_fit(fam.eps, fam.sol_norms)
    assert fit.N <= 1
    assert np.all(np.diff(fam.sup_a) > 0)
    inc = fam.increments()
    assert math.isnan(inc[0]) and np.all(inc[1:] >= 0)


def test_resolution_warning_in_family(one_mode):
    coeff = DistributionalCoefficient(T=1.0, atoms=(Atom(0.5, 1.0),))
    with pytest.warns(ResolutionWarning):
        fam = veryweak_solve(CD, one_mode, coeff, None, np.array([1.0]), SHORT, uniform_grid(1.0, 8))
    assert fam.warnings and all(m.grid_refined for m in fam.members)


def test_delta_prime_positivity(one_mode):
    coeff = DistributionalCoefficient(T=1.0, atoms=(Atom(0.5, 5.0, order=1),))
    with pytest.raises(InvalidCoefficientError, match="eps="):
        veryweak_solve(CD, one_mode, coeff, None, np.array([1.0]), SHORT, uniform_grid(1.0, 64))


def test_distributional_source(dec_small):
    src = DistributionalSource(lambda x: np.exp(-x[:, 0] ** 2), TimeDistribution(T=1.0, atoms=(Atom(0.3, 1.0),)))
    fam = veryweak_solve(CD, dec_small, DistributionalCoefficient(T=1.0), src, np.zeros(dec_small.size),
                         SHORT, uniform_grid(1.0, 128))
    norms = fam.sol_norms
    assert np.all(np.isfinite(norms)) and np.all(norms > 0)
    assert moderateness_fit(fam.eps, norms).N <= 1


def _families(extra):
    coeff = DistributionalCoefficient(T=1.0, atoms=(Atom(0.5, 0.5),))

    def fa(eps):
        return regularize(coeff, eps, SHORT)

    def fb(eps):
        base = fa(eps)
        return lambda t: base(t) + extra(eps)

    return fa, fb


def test_uniqueness_identical(dec_small):
    fa, _ = _families(lambda e: 0.0)
    u0 = dec_small.U[:, 0]
    rep = uniqueness_experiment(CD, dec_small, fa, fa, None, u0, SHORT, uniform_grid(1.0, 128), 1.0)
    assert rep.passed and np.all(rep.sol_diffs == 0)


def test_uniqueness_negligible_perturbation(dec_small):
    fa, fb = _families(lambda e: e**3)
    u0 = dec_small.U[:, 0]
    rep = uniqueness_experiment(CD, dec_small, fa, fb, None, u0, SHORT, uniform_grid(1.0, 128), 1.0)
    assert rep.passed and rep.sol_slope >= 2.5


def test_uniqueness_non_negligible(dec_small):
    fa, fb = _families(lambda e: 0.1)
    u0 = dec_small.U[:, 0]
    rep = uniqueness_experiment(CD, dec_small, fa, fb, None, u0, SHORT, uniform_grid(1.0, 128), 1.0)
    assert not rep.passed


def test_consistency_constant(dec_small):
    u0 = dec_small.U[:, :3] @ np.ones(3)
    rep = consistency_experiment(CD, dec_small, lambda t: np.full_like(t, 1.3), None, u0, SCHED,
                                 uniform_grid(1.0, 64), 1.0)
    assert rep.exact and rep.passed


def test_consistency_linear_monotone(dec_small):
    u0 = dec_small.U[:, :3] @ np.ones(3)
    rep = consistency_experiment(CD, dec_small, lambda t: 1 + t, None, u0, SCHED, uniform_grid(1.0, 128), 1.0)
    assert rep.monotone_tail and np.all(np.diff(rep.errors) < 0)


def test_consistency_kink(dec_small):
    u0 = dec_small.U[:, :3] @ np.ones(3)
    rep = consistency_experiment(CD, dec_small, lambda t: 1 + np.abs(t - 0.5), None, u0, SCHED,
                                 uniform_grid(1.0, 128), 1.0)
    assert rep.errors[-1] < rep.errors[0] and np.all(np.isfinite(rep.errors))


def test_consistency_with_source(dec_small):
    g = dec_small.U[:, 1]
    src = SourceTerm(site_fn=lambda t, x: np.cos(2 * t) * g)
    rep = consistency_experiment(CD, dec_small, lambda t: 1 + t, src, np.zeros(dec_small.size), SCHED,
                                 uniform_grid(1.0, 128), 1.0)
    assert rep.errors[-1] < rep.errors[0]
