"""Mollified distributional coefficients and epsilon-family experiments.

A coefficient ``a = smooth + sum w_i delta^{(k_i)}_{t_i} + sum h_j H(t - s_j)``
is regularized by convolution with ``psi_omega(t) = psi(t / omega) / omega``
where ``omega = omega(eps)`` follows ``omega^{-L1} = log(1 / eps)``. The
smooth part is known on ``[0, T]`` only and is extended by its end values
before convolving, which keeps constants exact and lower bounds intact.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .errors import ArgumentError, InvalidCoefficientError
from .kernels import Kernel
from .l1 import check_grid
from .solver import CoefficientProfile, SolutionField, SourceTerm, solve_full
from .spectral import SpectralDecomposition, sobolev_norm

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(128)


class ResolutionWarning(UserWarning):
    """A mollified atom is covered by too few grid nodes."""


def _bump_base(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1.0
    xi = x[inside]
    out[inside] = np.exp(-1.0 / (1.0 - xi * xi))
    return out


@lru_cache(maxsize=None)
def mollifier_constant() -> float:
    """``1 / int_{-1}^{1} exp(-1 / (1 - t^2)) dt`` by adaptive quadrature."""
    val, _ = integrate.quad(lambda s: math.exp(-1.0 / (1.0 - s * s)), -1.0, 1.0, epsabs=1e-14, epsrel=1e-13)
    return 1.0 / val


@dataclass(frozen=True)
class Mollifier:
    """Even unit-mass bump on (-1, 1): ``"bump"`` (smooth) or ``"raised_cosine"``."""

    name: str = "bump"

    def __post_init__(self):
        if self.name not in ("bump", "raised_cosine"):
            raise ArgumentError(f"unknown mollifier {self.name!r}")

    def psi(self, x):
        x = np.asarray(x, dtype=float)
        if self.name == "bump":
            return mollifier_constant() * _bump_base(x)
        return np.where(np.abs(x) < 1.0, 0.5 * (1.0 + np.cos(np.pi * x)), 0.0)

    def dpsi(self, x):
        x = np.asarray(x, dtype=float)
        if self.name == "bump":
            out = np.zeros_like(x)
            inside = np.abs(x) < 1.0
            xi = x[inside]
            out[inside] = self.psi(xi) * (-2.0 * xi / (1.0 - xi * xi) ** 2)
            return out
        return np.where(np.abs(x) < 1.0, -0.5 * np.pi * np.sin(np.pi * x), 0.0)

    def step(self, x):
        """``int_{-inf}^x psi``; exactly 1/2 at 0 by symmetry."""
        x = np.asarray(x, dtype=float)
        if self.name == "raised_cosine":
            xc = np.clip(x, -1.0, 1.0)
            return 0.5 + 0.5 * xc + np.sin(np.pi * xc) / (2.0 * np.pi)
        r = np.minimum(np.abs(x), 1.0)
        # Gauss-Legendre on [0, r]
        nodes = 0.5 * r[..., None] * (_GL_NODES + 1.0)
        half = 0.5 * r * np.sum(_GL_WEIGHTS * self.psi(nodes), axis=-1)
        return 0.5 + np.sign(x) * half

    def integral(self) -> float:
        """Total mass under the module's fixed quadrature."""
        return float(np.sum(_GL_WEIGHTS * self.psi(_GL_NODES)))

    def _weights(self):
        q = _GL_WEIGHTS * self.psi(_GL_NODES)
        return _GL_NODES, q / q.sum()  # exact unit mass keeps constants exact


@dataclass(frozen=True)
class EpsilonSchedule:
    eps: tuple = tuple(2.0 ** -k for k in range(1, 11))
    L1: int = 1

    def __post_init__(self):
        e = np.asarray(self.eps, dtype=float)
        if e.size < 1 or np.any(e <= 0) or np.any(e >= 1):
            raise ArgumentError("epsilon values must lie in (0, 1)")
        if np.any(np.diff(e) >= 0):
            raise ArgumentError("epsilon schedule must be strictly decreasing")
        if int(self.L1) != self.L1 or self.L1 < 1:
            raise ArgumentError(f"L1 must be a positive integer, got {self.L1}")

    def omega(self, eps: float) -> float:
        return math.log(1.0 / eps) ** (-1.0 / self.L1)

    @property
    def omegas(self) -> np.ndarray:
        return np.array([self.omega(e) for e in self.eps])

    @classmethod
    def geometric(cls, k_min: int = 1, k_max: int = 10, L1: int = 1) -> "EpsilonSchedule":
        return cls(tuple(2.0 ** -k for k in range(k_min, k_max + 1)), L1)


@dataclass(frozen=True)
class Atom:
    t0: float
    weight: float
    order: int = 0  # 0: delta, 1: delta'


@dataclass(frozen=True)
class Jump:
    t0: float
    height: float


@dataclass(frozen=True)
class TimeDistribution:
    """Smooth part (or None for zero) plus point atoms and jumps on [0, T]."""

    T: float = 1.0
    smooth: Callable | None = field(default=None, compare=False)
    atoms: tuple = ()
    jumps: tuple = ()

    def __post_init__(self):
        for a in self.atoms:
            if not 0.0 <= a.t0 <= self.T:
                raise ArgumentError(f"atom at t={a.t0} lies outside [0, {self.T}]")
            if a.order not in (0, 1):
                raise ArgumentError(f"atom order must be 0 or 1, got {a.order}")
        for j in self.jumps:
            if not 0.0 <= j.t0 <= self.T:
                raise ArgumentError(f"jump at t={j.t0} lies outside [0, {self.T}]")

    @property
    def singular_points(self) -> list[float]:
        return [a.t0 for a in self.atoms] + [j.t0 for j in self.jumps]

    def _smooth_values(self, t: np.ndarray) -> np.ndarray:
        if self.smooth is None:
            return np.zeros_like(t)
        v = np.asarray(self.smooth(np.clip(t, 0.0, self.T)), dtype=float)
        return np.broadcast_to(v, t.shape)

    def mollified(self, omega: float, mollifier: Mollifier | None = None) -> Callable:
        """The callable ``t -> (distribution * psi_omega)(t)``."""
        moll = mollifier or Mollifier()
        nodes, q = moll._weights()

        def a_eps(t):
            t = np.asarray(t, dtype=float)
            out = np.tensordot(self._smooth_values(t[..., None] - omega * nodes), q, axes=([-1], [0]))
            for a in self.atoms:
                x = (t - a.t0) / omega
                if a.order == 0:
                    out = out + a.weight * moll.psi(x) / omega
                else:
                    out = out + a.weight * moll.dpsi(x) / omega**2
            for j in self.jumps:
                out = out + j.height * moll.step((t - j.t0) / omega)
            return out

        return a_eps


@dataclass(frozen=True)
class DistributionalCoefficient(TimeDistribution):
    """Coefficient with positive floor ``a0``; the smooth part defaults to ``a0``."""

    a0: float = 1.0

    def __post_init__(self):
        super().__post_init__()
        if not self.a0 > 0:
            raise InvalidCoefficientError(f"coefficient floor must be positive, got {self.a0}")

    def _smooth_values(self, t):
        if self.smooth is None:
            return np.full(t.shape, float(self.a0))
        return super()._smooth_values(t)


def regularize(coeff: TimeDistribution, eps: float, schedule: EpsilonSchedule,
               mollifier: Mollifier | None = None) -> Callable:
    """``a_eps = a * psi_omega(eps)``."""
    if not any(math.isclose(eps, e, rel_tol=1e-12) for e in schedule.eps):
        raise ArgumentError(f"eps={eps} is not part of the schedule")
    return coeff.mollified(schedule.omega(eps), mollifier)


def mollify_source(src: SourceTerm | None, omega: float, T: float,
                   mollifier: Mollifier | None = None) -> SourceTerm | None:
    """Time-mollify a site-space source (end values extend it outside [0, T])."""
    if src is None or src.is_zero:
        return src
    if src.site_fn is None:
        raise ArgumentError("only site-space sources can be mollified")
    nodes, q = (mollifier or Mollifier())._weights()
    fn = src.site_fn

    def f_eps(t, x):
        ts = np.clip(t - omega * nodes, 0.0, T)
        return sum(qi * np.asarray(fn(ti, x)) for qi, ti in zip(q, ts))

    return SourceTerm(site_fn=f_eps)


@dataclass(frozen=True)
class DistributionalSource:
    """``f(t, x) = temporal(t) * spatial(x)`` with a distributional time factor."""

    spatial: Callable
    temporal: TimeDistribution

    def regularized(self, omega: float, mollifier: Mollifier | None = None) -> SourceTerm:
        ft = self.temporal.mollified(omega, mollifier)
        sp = self.spatial
        return SourceTerm(site_fn=lambda t, x: float(ft(t)) * np.asarray(sp(x)).reshape(-1))


# --- grid resolution -----------------------------------------------------------

def nodes_in_window(t: np.ndarray, centre: float, omega: float) -> int:
    return int(np.count_nonzero((t >= centre - omega) & (t <= centre + omega)))


def refine_grid(t, centres: Sequence[float], omega: float, min_nodes: int = 8) -> np.ndarray:
    """Halve intervals meeting ``[c - omega, c + omega]`` until each window holds ``min_nodes``."""
    t = check_grid(t)
    for c in centres:
        for _ in range(60):
            if nodes_in_window(t, c, omega) >= min_nodes:
                break
            lo, hi = t[:-1], t[1:]
            hit = (hi >= c - omega) & (lo <= c + omega)
            mids = 0.5 * (lo[hit] + hi[hit])
            t = np.unique(np.concatenate([t, mids]))
    return t


def resolve_grid(grid, coeff: TimeDistribution, eps_values, schedule: EpsilonSchedule,
                 min_nodes: int = 8) -> tuple[np.ndarray, list[str]]:
    """Refine ``grid`` so every bump of every listed eps holds ``min_nodes`` nodes.

    Each shortfall on the original grid is reported through a
    :class:`ResolutionWarning` and returned as a note.
    """
    base = check_grid(grid)
    t, notes = base, []
    for eps in eps_values:
        om = schedule.omega(eps)
        for c in coeff.singular_points:
            k = nodes_in_window(base, c, om)
            if k < min_nodes:
                msg = (f"eps={eps:g}: only {k} grid nodes across the bump at t={c:g} "
                       f"(omega={om:.4g}); grid refined locally")
                warnings.warn(msg, ResolutionWarning, stacklevel=3)
                notes.append(msg)
                t = refine_grid(t, [c], om, min_nodes)
    return t, notes


# --- fits ---------------------------------------------------------------------

@dataclass
class ModeratenessFit:
    N: int
    slope: float
    r2: float
    flags: list[str] = field(default_factory=list)


def _linfit(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss if ss > 0 else 1.0
    return float(coef[0]), r2


def moderateness_fit(eps, norms) -> ModeratenessFit:
    """Fit ``norm ~ eps^-slope``; ``N = max(0, ceil(slope))``.

    Growth that is better described as linear in ``log(1/eps)`` than as a
    power (and has slope below 1) is flagged slowly varying and given N = 0.
    """
    eps = np.asarray(eps, dtype=float)
    norms = np.asarray(norms, dtype=float)
    if eps.size < 4:
        raise ArgumentError("moderateness fit needs at least 4 epsilon values")
    if np.any(norms < 0) or not np.all(np.isfinite(norms)):
        raise ArgumentError("norms must be finite and nonnegative")
    x = np.log(1.0 / eps)
    if np.all(norms == 0) or np.ptp(norms) <= 1e-14 * np.max(np.abs(norms)):
        return ModeratenessFit(0, 0.0, 1.0, ["degenerate: zero variance"])
    y = np.log(np.maximum(norms, 1e-300))
    slope, r2 = _linfit(x, y)
    flags: list[str] = []
    N = max(0, math.ceil(slope - 1e-9))
    if 0 < slope < 1:
        _, r2_log = _linfit(x, norms)
        if r2_log >= r2:
            flags.append("slowly varying: logarithmic growth")
            N = 0
    return ModeratenessFit(N, slope, r2, flags)


@dataclass
class NegligibilityReport:
    slope: float
    passed: dict
    identical: bool

    @property
    def all_passed(self) -> bool:
        return all(self.passed.values())


def _tail(n: int) -> slice:
    return slice(n // 2, n) if n >= 6 else slice(0, n)


def negligibility_check(eps, diffs, qs=(1, 2, 3), slope_tol: float = 1e-3) -> NegligibilityReport:
    """Pass for ``q`` when the tail slope of log(diff) against log(eps) is >= q."""
    eps = np.asarray(eps, dtype=float)
    diffs = np.abs(np.asarray(diffs, dtype=float))
    if np.all(diffs == 0):
        return NegligibilityReport(math.inf, {q: True for q in qs}, True)
    sl = _tail(eps.size)
    slope, _ = _linfit(np.log(eps[sl]), np.log(np.maximum(diffs[sl], 1e-300)))
    return NegligibilityReport(slope, {q: bool(slope >= q - slope_tol) for q in qs}, False)


# --- families -----------------------------------------------------------------

@dataclass
class FamilyMember:
    eps: float
    omega: float
    field: SolutionField
    sup_a: float
    sol_norm: float
    grid_refined: bool


@dataclass
class VeryWeakFamily:
    members: list
    warnings: list = field(default_factory=list)

    @property
    def eps(self) -> np.ndarray:
        return np.array([m.eps for m in self.members])

    @property
    def sol_norms(self) -> np.ndarray:
        return np.array([m.sol_norm for m in self.members])

    @property
    def sup_a(self) -> np.ndarray:
        return np.array([m.sup_a for m in self.members])

    def increments(self, s: float = 0.0) -> np.ndarray:
        """``max_t ||u_eps - u_eps'||_{H^{2+s}}`` for consecutive members; NaN first."""
        out = [math.nan]
        for a, b in zip(self.members[:-1], self.members[1:]):
            out.append(_field_diff_norm(b.field, a.field, s))
        return np.array(out)


def _profile_for(a_eps: Callable, T: float, grid: np.ndarray, eps: float) -> CoefficientProfile:
    ts = np.union1d(np.linspace(0.0, T, 10_000), grid)
    vals = np.asarray(a_eps(ts), dtype=float)
    lo = float(vals.min())
    if not lo > 0 or not np.all(np.isfinite(vals)):
        raise InvalidCoefficientError(f"regularized coefficient is not positive at eps={eps:g} (min {lo:.6g})")
    return CoefficientProfile(a_eps, T, lo, float(vals.max()), label=f"eps={eps:g}")


def solve_regularized(kernel: Kernel, dec: SpectralDecomposition, a_eps: Callable, source: SourceTerm | None,
                      u0, grid, T: float, eps: float, s: float = 0.0, threads: int = 1):
    prof = _profile_for(a_eps, T, grid, eps)
    fld = solve_full(kernel, dec, prof, u0, source, grid, threads=threads)
    return fld, prof


def veryweak_solve(kernel: Kernel, dec: SpectralDecomposition, coeff: DistributionalCoefficient,
                   source, u0, schedule: EpsilonSchedule, grid, s: float = 0.0,
                   mollifier: Mollifier | None = None, threads: int = 1,
                   min_nodes: int = 8) -> VeryWeakFamily:
    """Solve the mollified problem for every eps of the schedule.

    All members share one time grid, refined where the narrowest bump
    would be covered by fewer than ``min_nodes`` nodes. ``source`` may be None, a site-space :class:`SourceTerm` (mollified in
    time) or a :class:`DistributionalSource`.
    """
    base = check_grid(grid)
    T = coeff.T
    t, notes = resolve_grid(base, coeff, schedule.eps, schedule, min_nodes)
    refined = t.size != base.size
    members = []
    for eps in schedule.eps:
        om = schedule.omega(eps)
        a_eps = coeff.mollified(om, mollifier)
        if isinstance(source, DistributionalSource):
            src = source.regularized(om, mollifier)
        else:
            src = mollify_source(source, om, T, mollifier)
        fld, _ = solve_regularized(kernel, dec, a_eps, src, u0, t, T, eps, s, threads)
        members.append(FamilyMember(eps, om, fld, float(np.max(a_eps(t))), float(np.max(fld.h_norms(2 + s))), refined))
    return VeryWeakFamily(members, notes)


def _field_diff_norm(f1: SolutionField, f2: SolutionField, s: float) -> float:
    if f1.t.shape != f2.t.shape or not np.allclose(f1.t, f2.t, rtol=0, atol=1e-14):
        raise ArgumentError("solution fields live on different grids")
    return float(np.max(sobolev_norm(f1.dec, f1.modes - f2.modes, 2 + s)))


@dataclass
class UniquenessReport:
    eps: np.ndarray
    coef_diffs: np.ndarray
    sol_diffs: np.ndarray
    coef_negligibility: NegligibilityReport
    sol_slope: float
    passed: bool


def uniqueness_experiment(kernel: Kernel, dec: SpectralDecomposition, family_a: Callable, family_b: Callable,
                          source: SourceTerm | None, u0, schedule: EpsilonSchedule, grid, T: float,
                          s: float = 0.0, slope_margin: float = 0.5, threads: int = 1) -> UniquenessReport:
    """Solve two coefficient families and compare the decay of their differences.

    ``family_a(eps)`` and ``family_b(eps)`` return coefficient callables. The
    run passes when the coefficient difference is negligible on the probe
    exponents and the solution difference decays at least as fast, up to
    ``slope_margin``.
    """
    t = check_grid(grid)
    probe = np.union1d(np.linspace(0.0, T, 2001), t)
    eps_arr = np.asarray(schedule.eps, dtype=float)
    cd, sd = [], []
    for eps in schedule.eps:
        aa, ab = family_a(eps), family_b(eps)
        cd.append(float(np.max(np.abs(aa(probe) - ab(probe)))))
        fa, _ = solve_regularized(kernel, dec, aa, source, u0, t, T, eps, s, threads)
        fb, _ = solve_regularized(kernel, dec, ab, source, u0, t, T, eps, s, threads)
        sd.append(_field_diff_norm(fa, fb, s))
    cd, sd = np.array(cd), np.array(sd)
    neg = negligibility_check(eps_arr, cd)
    if np.all(sd == 0):
        sol_slope = math.inf
    else:
        sl = _tail(eps_arr.size)
        sol_slope, _ = _linfit(np.log(eps_arr[sl]), np.log(np.maximum(sd[sl], 1e-300)))
    if neg.identical:
        ok = bool(np.all(sd <= 1e-14 * max(1.0, float(np.max(np.abs(u0))))))
    else:
        ok = neg.all_passed and sol_slope >= neg.slope - slope_margin
    return UniquenessReport(eps_arr, cd, sd, neg, sol_slope, bool(ok))


@dataclass
class ConsistencyReport:
    eps: np.ndarray
    errors: np.ndarray
    exact: bool
    monotone_tail: bool
    reduction: float
    passed: bool


def consistency_experiment(kernel: Kernel, dec: SpectralDecomposition, a: Callable, source: SourceTerm | None,
                           u0, schedule: EpsilonSchedule, grid, T: float, s: float = 0.0,
                           tail_from: float = 2.0**-3, factor: float = 5.0, exact_tol: float = 1e-8,
                           mollifier: Mollifier | None = None, threads: int = 1) -> ConsistencyReport:
    """Distance between mollified and classical solutions for continuous ``a``.

    ``e(eps) = max_t ||u_eps(t) - u(t)||_{H^{2+s}}``. Passes when every error
    is below ``exact_tol`` or when ``e`` is nonincreasing over the tail
    (``eps <= tail_from``) and drops by ``factor`` across it.
    """
    t = check_grid(grid)
    prof = CoefficientProfile.regular(a, T)
    ref = solve_full(kernel, dec, prof, u0, source, t, threads=threads)
    coeff = DistributionalCoefficient(T=T, smooth=a, a0=prof.a0)
    errs = []
    for eps in schedule.eps:
        om = schedule.omega(eps)
        src = mollify_source(source, om, T, mollifier)
        fld, _ = solve_regularized(kernel, dec, coeff.mollified(om, mollifier), src, u0, t, T, eps, s, threads)
        errs.append(_field_diff_norm(fld, ref, s))
    eps_arr = np.asarray(schedule.eps, dtype=float)
    errs = np.array(errs)
    exact = bool(np.all(errs <= exact_tol))
    tail = eps_arr <= tail_from * (1 + 1e-12)
    et = errs[tail]
    monotone = bool(np.all(np.diff(et) <= 1e-12 * max(1.0, float(et.max())))) if et.size else True
    reduction = float(et[0] / et[-1]) if et.size and et[-1] > 0 else math.inf
    passed = exact or (monotone and reduction >= factor)
    return ConsistencyReport(eps_arr, errs, exact, monotone, reduction, bool(passed))
