"""Randomized property suites shared by the CLI and the test-suite.

Every draw comes from a caller-supplied ``numpy.random.Generator`` so a
fixed seed reproduces the suite exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import Kernel
from .solver import (CoefficientProfile, SourceTerm, sign_comparison_check, solve_full,
                     verify_wellposedness)
from .spectral import SpectralDecomposition


def random_coefficient(rng: np.random.Generator, T: float, a_min: float = 1.0, a_max: float = 2.0,
                       terms: int = 4) -> CoefficientProfile:
    """Random trigonometric sum rescaled to span ``[a_min, a_max]`` on a fine sample."""
    amp = rng.normal(size=terms) / np.arange(1, terms + 1)
    phase = rng.uniform(0, 2 * np.pi, size=terms)
    k = np.arange(1, terms + 1)

    def g(t):
        t = np.asarray(t, dtype=float)
        return np.sum(amp * np.cos(np.pi * k * t[..., None] / T + phase), axis=-1)

    ts = np.linspace(0.0, T, 10_000)
    lo, hi = float(g(ts).min()), float(g(ts).max())
    span = a_max - a_min

    def a(t):
        return a_min + span * np.clip((g(t) - lo) / (hi - lo), 0.0, 1.0)

    return CoefficientProfile.regular(a, T, label="random")


def random_initial_data(rng: np.random.Generator, dec: SpectralDecomposition, modes: int = 8) -> np.ndarray:
    k = min(modes, dec.size)
    return dec.U[:, :k] @ rng.normal(size=k)


def random_source(rng: np.random.Generator, dec: SpectralDecomposition, modes: int = 8) -> SourceTerm:
    """``fa cos(fb t) g(x)`` with ``g`` a random combination of low modes."""
    k = min(modes, dec.size)
    g = dec.U[:, :k] @ rng.normal(size=k)
    fa, fb = float(rng.uniform(0.1, 2.0)), float(rng.uniform(0.5, 6.0))
    return SourceTerm(site_fn=lambda t, x: fa * np.cos(fb * t) * g)


@dataclass
class DrawResult:
    draw: int
    max_ratio: float
    passed: bool


def wellposedness_suite(kernel: Kernel, dec: SpectralDecomposition, grid, T: float, draws: int,
                        rng: np.random.Generator, s: float = 0.0, a_min: float = 1.0, a_max: float = 2.0,
                        slack: float = 5e-2, threads: int = 1) -> list[DrawResult]:
    out = []
    for i in range(draws):
        prof = random_coefficient(rng, T, a_min, a_max)
        u0 = random_initial_data(rng, dec)
        f = random_source(rng, dec)
        fld = solve_full(kernel, dec, prof, u0, f, grid, threads=threads)
        rep = verify_wellposedness(fld, prof, u0, f, s, dec.lambda_min, slack)
        out.append(DrawResult(i, rep.max_ratio, rep.passed))
    return out


@dataclass
class SignDrawResult:
    draw: int
    lam: float
    min_value: float
    floor_excess: float
    passed: bool


def sign_comparison_suite(kernel: Kernel, lams, grid, T: float, profiles: int, rng: np.random.Generator,
                          a_min: float = 1.0, a_max: float = 2.0) -> list[SignDrawResult]:
    """Unit initial value, zero source: sign, floor-curve domination and boundedness."""
    out = []
    for i in range(profiles):
        prof = random_coefficient(rng, T, a_min, a_max)
        for lam in lams:
            rep = sign_comparison_check(kernel, float(lam), prof, 1.0, None, grid)
            out.append(SignDrawResult(i, float(lam), rep.min_value, rep.excess_over_floor_curve, rep.passed))
    return out
