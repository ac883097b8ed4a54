"""Mode-by-mode solver for ``D u + a(t) H u = f`` on the lattice.

In the eigenbasis of ``H`` every coefficient obeys the scalar problem

    D u_xi + lam_xi a(t) u_xi = f_xi,   u_xi(0) = u0_xi,

which is stepped with the implicit L1 scheme. A second route iterates the
Duhamel representation around the frozen coefficient ``a1 = sup a``,

    u(t) = u0 w(t) + (1 / (lam a1)) int_0^t phi(s) (-w'(t - s)) ds,
    phi  = f + lam (a1 - a(s)) u(s),

with ``w`` the relaxation function for ``lam a1``; it is kept for
cross-validation.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ArgumentError, InvalidCoefficientError, NumericalError
from .kernels import Kernel, KernelKind
from .l1 import L1Operator, check_grid, is_uniform
from .relaxation import relaxation_closed_form, relaxation_l1, relaxation_talbot
from .spectral import SpectralDecomposition, forward_transform, sobolev_norm


@dataclass(frozen=True)
class CoefficientProfile:
    """Time-dependent diffusion coefficient with floor ``a0`` and bound ``a1``."""

    func: Callable = field(compare=False)
    T: float
    a0: float
    a1: float
    label: str = "regular"

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        vals = np.asarray(self.func(t), dtype=float)
        if vals.shape != t.shape:
            vals = np.broadcast_to(vals, t.shape).copy()
        return vals

    @classmethod
    def regular(cls, func: Callable, T: float, a0: float | None = None, a1: float | None = None,
                samples: int = 10_000, label: str = "regular") -> "CoefficientProfile":
        """Sample ``func`` on ``samples`` points to confirm ``a0 <= a <= a1``."""
        if not T > 0:
            raise ArgumentError(f"final time must be positive, got {T}")
        ts = np.linspace(0.0, T, samples)
        vals = np.asarray(func(ts), dtype=float)
        vals = np.broadcast_to(vals, ts.shape)
        if not np.all(np.isfinite(vals)):
            raise InvalidCoefficientError("coefficient is not finite on [0, T]")
        lo, hi = float(vals.min()), float(vals.max())
        a0 = lo if a0 is None else float(a0)
        a1 = hi if a1 is None else float(a1)
        if not a0 > 0:
            raise InvalidCoefficientError(f"coefficient floor must be positive, got {a0}")
        if lo < a0 - 1e-12:
            raise InvalidCoefficientError(f"coefficient drops to {lo:.6g} below its floor {a0}")
        if a1 < hi - 1e-12 or a1 < a0:
            raise InvalidCoefficientError(f"bound a1={a1} is below the sampled maximum {hi:.6g}")
        return cls(func, T, a0, a1, label)

    @classmethod
    def constant(cls, value: float, T: float) -> "CoefficientProfile":
        return cls.regular(lambda t: np.full_like(np.asarray(t, dtype=float), value), T, label="constant")


@dataclass(frozen=True)
class SourceTerm:
    """Source given per mode on the grid, or per site as ``fn(t, x)``.

    ``x`` is the (sites, n) coordinate array of the lattice.
    """

    mode_samples: np.ndarray | None = field(default=None, compare=False)
    site_fn: Callable | None = field(default=None, compare=False)

    @classmethod
    def zero(cls) -> "SourceTerm":
        return cls()

    @property
    def is_zero(self) -> bool:
        return self.mode_samples is None and self.site_fn is None

    def modes(self, dec: SpectralDecomposition, t: np.ndarray) -> np.ndarray | None:
        if self.mode_samples is not None:
            f = np.asarray(self.mode_samples)
            if f.shape != (t.size, dec.size):
                raise ArgumentError(f"source samples have shape {f.shape}, expected {(t.size, dec.size)}")
        elif self.site_fn is not None:
            x = dec.spec.positions()
            F = np.stack([np.asarray(self.site_fn(tm, x)).reshape(-1) for tm in t])
            f = forward_transform(dec, F.T).T
        else:
            return None
        if not np.all(np.isfinite(f)):
            raise ArgumentError("source is not finite on the grid")
        return f


@dataclass
class SolutionField:
    """Mode trajectories ``u[m, xi]`` and their discrete Caputo derivative."""

    t: np.ndarray
    modes: np.ndarray
    dec: SpectralDecomposition
    caputo: np.ndarray
    kernel: Kernel

    def reconstruct(self, m: int) -> np.ndarray:
        """Site values at grid index ``m``."""
        return self.dec.U @ self.modes[m]

    def h_norms(self, s: float) -> np.ndarray:
        """``||u(t_m)||_{H^s}`` for every grid time."""
        return sobolev_norm(self.dec, self.modes, s)

    def caputo_norms(self, s: float) -> np.ndarray:
        return sobolev_norm(self.dec, self.caputo, s)


def apply_caputo(kernel: Kernel, trajectory, grid) -> np.ndarray:
    """L1 approximation of ``D u`` at every node (zero at ``t = 0``)."""
    return L1Operator(kernel, grid).apply(trajectory)


def _relaxation_on_grid(kernel: Kernel, lam: float, t: np.ndarray) -> np.ndarray:
    w = np.empty_like(t)
    w[0] = 1.0
    if kernel.kind == KernelKind.CD:
        w[1:] = relaxation_closed_form(kernel, lam, t[1:])
    else:
        w[1:] = relaxation_talbot(kernel, lam, t[1:])
    return w


def _picard(kernel: Kernel, lam: float, a_vals: np.ndarray, a1: float, fhat, u0: complex,
            t: np.ndarray, tol: float = 1e-10, max_iter: int = 200) -> np.ndarray:
    if not is_uniform(t):
        raise ArgumentError("the Duhamel iteration needs a uniform grid")
    M = t.size - 1
    mu = lam * a1
    w = _relaxation_on_grid(kernel, mu, t)
    # kappa[d] weights phi on the interval that ends d steps before t_m
    kappa = (w[:-1] - w[1:]) / mu
    f = np.zeros(M + 1) if fhat is None else np.asarray(fhat)
    u = u0 * w
    best = math.inf
    growth = 0
    for _ in range(max_iter):
        phi = f + lam * (a1 - a_vals) * u
        mid = 0.5 * (phi[:-1] + phi[1:])
        new = u0 * w
        new[1:] = new[1:] + np.convolve(mid, kappa)[:M]
        res = float(np.max(np.abs(new - u)))
        u = new
        if res <= tol * max(1.0, float(np.max(np.abs(u)))):
            return u
        if res < best:
            best, growth = res, 0
        else:
            growth += 1
            if growth >= 10:
                raise NumericalError(
                    "Duhamel iteration is not contracting (residual grew for 10 iterations); use smaller steps"
                )
    raise NumericalError(f"Duhamel iteration did not reach tolerance {tol} in {max_iter} iterations")


def solve_mode(kernel: Kernel, lam: float, profile: CoefficientProfile, fhat, u0hat, grid,
               method: str = "l1") -> np.ndarray:
    """Trajectory of one mode; ``method`` is ``"l1"`` or ``"picard"``."""
    if not lam > 0:
        raise ArgumentError(f"eigenvalue must be positive, got {lam}")
    t = check_grid(grid)
    a_vals = profile(t)
    if method == "picard":
        return _picard(kernel, lam, a_vals, profile.a1, fhat, u0hat, t)
    if method != "l1":
        raise ArgumentError(f"unknown method {method!r}")
    f = None if fhat is None else np.asarray(fhat).reshape(-1, 1)
    return L1Operator(kernel, t).solve(np.array([lam]), a_vals, f, np.array([u0hat]))[:, 0]


def solve_full(kernel: Kernel, dec: SpectralDecomposition, profile: CoefficientProfile, u0,
               f: SourceTerm | None, grid, threads: int = 1, method: str = "l1") -> SolutionField:
    """Solve every mode and return the field with its Caputo derivative."""
    t = check_grid(grid)
    if t[-1] > profile.T * (1 + 1e-12):
        raise ArgumentError("time grid extends past the coefficient's horizon")
    u0 = np.asarray(u0)
    if not np.all(np.isfinite(u0)):
        raise ArgumentError("initial data is not finite")
    u0hat = forward_transform(dec, u0)
    fmodes = None if f is None else f.modes(dec, t)
    a_vals = profile(t)
    lam = dec.eigenvalues
    op = L1Operator(kernel, t)

    if method == "picard":
        cols = [
            _picard(kernel, float(lam[i]), a_vals, profile.a1, None if fmodes is None else fmodes[:, i], u0hat[i], t)
            for i in range(dec.size)
        ]
        modes = np.stack(cols, axis=1)
    else:
        chunks = np.array_split(np.arange(dec.size), max(1, min(threads, dec.size)))

        def run(idx):
            try:
                return op.solve(lam[idx], a_vals, None if fmodes is None else fmodes[:, idx], u0hat[idx])
            except NumericalError as exc:
                raise NumericalError(f"modes {idx[0]}..{idx[-1]}: {exc}") from exc

        if len(chunks) == 1:
            parts = [run(chunks[0])]
        else:
            with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
                parts = list(pool.map(run, chunks))
        modes = np.concatenate(parts, axis=1)
    modes[0] = u0hat
    return SolutionField(t, modes, dec, op.apply(modes), kernel)


# --- checks ------------------------------------------------------------------

@dataclass
class WellposednessReport:
    ratio: np.ndarray
    lhs: np.ndarray
    rhs: float
    constant: float
    max_ratio: float
    passed: bool


def verify_wellposedness(field: SolutionField, profile: CoefficientProfile, u0, f: SourceTerm | None,
                         s: float, lam_witness: float, slack: float = 5e-2) -> WellposednessReport:
    """Compare ``||u||_{H^{2+s}} + ||D u||_{H^s}`` with ``C_a (||u0|| + sup ||f||)``.

    ``C_a = (1 + a1) max(1, 1 / (Lambda a0))`` with ``Lambda`` the smallest
    eigenvalue seen in the experiment.
    """
    dec = field.dec
    lhs = field.h_norms(2 + s) + field.caputo_norms(s)
    u0n = sobolev_norm(dec, forward_transform(dec, np.asarray(u0)), 2 + s)
    fm = None if f is None else f.modes(dec, field.t)
    fn = 0.0 if fm is None else float(np.max(sobolev_norm(dec, fm, 2 + s)))
    C = (1.0 + profile.a1) * max(1.0, 1.0 / (lam_witness * profile.a0))
    rhs = C * (u0n + fn)
    if rhs == 0:
        ratio = np.zeros_like(lhs)
    else:
        ratio = lhs / rhs
    mx = float(ratio.max())
    return WellposednessReport(ratio, lhs, rhs, C, mx, mx <= 1.0 + slack)


@dataclass
class SignComparisonReport:
    min_value: float
    sign_ok: bool
    excess_over_floor_curve: float | None
    comparison_ok: bool | None
    excess_over_initial: float | None
    bounded_ok: bool | None

    @property
    def passed(self) -> bool:
        return self.sign_ok and self.comparison_ok is not False and self.bounded_ok is not False


def sign_comparison_check(kernel: Kernel, lam: float, profile: CoefficientProfile, u0hat: float,
                          fhat, grid, sign_tol: float = 1e-8, cmp_tol: float = 1e-6,
                          bound_tol: float = 1e-8) -> SignComparisonReport:
    """Sign preservation and comparison with the floor-coefficient relaxation.

    The comparison curve ``u0 w_{lam a0}`` is computed with the same L1 scheme
    on the same grid, so the check isolates the comparison property from
    discretization error.
    """
    t = check_grid(grid)
    u = solve_mode(kernel, lam, profile, fhat, u0hat, t)
    u = np.real(u)
    sign = 1.0 if u0hat >= 0 else -1.0
    min_val = float(np.min(sign * u))
    nonneg_data = fhat is None or np.all(sign * np.real(np.asarray(fhat)) >= 0)
    sign_ok = bool(min_val >= -sign_tol) if nonneg_data else True
    exc_floor = cmp_ok = exc_init = bnd_ok = None
    if fhat is None or not np.any(np.asarray(fhat)):
        w0 = relaxation_l1(kernel, lam * profile.a0, t).w
        exc_floor = float(np.max(sign * u - abs(u0hat) * w0))
        cmp_ok = exc_floor <= cmp_tol
        exc_init = float(np.max(np.abs(u)) - abs(u0hat))
        bnd_ok = exc_init <= bound_tol
    return SignComparisonReport(min_val, sign_ok, exc_floor, cmp_ok, exc_init, bnd_ok)


def source_bound_check(field: SolutionField, fmodes: np.ndarray, a0: float, slack: float = 5e-2) -> dict:
    """``|u^f(t, xi)| <= max_t |f(t, xi)| / (lam_xi a0)`` for a zero-initial-data run."""
    bound = np.max(np.abs(fmodes), axis=0) / (field.dec.eigenvalues * a0)
    peak = np.max(np.abs(field.modes), axis=0)
    excess = float(np.max((peak - bound) / np.maximum(bound, 1e-300)))
    return {"worst_relative_excess": excess, "passed": bool(excess <= slack)}
