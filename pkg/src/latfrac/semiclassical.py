"""Convergence of the lattice problem as ``hbar -> 0``.

Two measurements:

* the Hamiltonian defect ``(H_V - H_{hbar,V}) phi`` on lattice sites, against
  the Taylor-remainder bound ``(hbar^2 / 24) sum_j 2 max |d_j^4 phi|``;
* self-convergence of the full solution across an ``hbar`` sweep. The
  continuum solution is replaced by a lattice solve at half the finest
  spacing, and every coarse solution is compared with it on the coarse sites.

Lattice norms carry the quadrature factor ``hbar^(n/2)`` so that norms on
different spacings approximate the same continuum integral.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ArgumentError, ConfigError, InvalidCoefficientError
from .kernels import Kernel
from .l1 import check_grid
from .lattice import LatticeSpec, Potential, apply_discrete_laplacian, assemble_hamiltonian, enumerate_sites
from .solver import CoefficientProfile, SolutionField, SourceTerm, solve_full
from .spectral import SpectralDecomposition, eigendecompose, sobolev_weights
from .veryweak import DistributionalCoefficient, EpsilonSchedule, Mollifier, resolve_grid


# --- Hamiltonian defect ----------------------------------------------------------

@dataclass(frozen=True)
class SmoothFunction:
    """``phi`` with its Laplacian and (optionally) pure fourth partials.

    All callables take an (points, n) coordinate array.
    """

    phi: Callable
    laplacian: Callable | None = None
    fourth: tuple | None = None


def _fd_fourth(phi: Callable, x: np.ndarray, j: int, h: float) -> np.ndarray:
    e = np.zeros(x.shape[1])
    e[j] = h
    return (phi(x + 2 * e) - 4 * phi(x + e) + 6 * phi(x) - 4 * phi(x - e) + phi(x - 2 * e)) / h**4


def _probe_points(spec: LatticeSpec) -> np.ndarray:
    # the Taylor segment around a site reaches one spacing out
    refine = 8 if spec.n <= 2 else 2
    fine = LatticeSpec(spec.n, spec.hbar / refine, refine * (spec.R + 1), site_cap=10**7)
    return fine.positions()


@dataclass
class DefectReport:
    hbar: float
    defect: float
    bound: float
    passed: bool


def hamiltonian_defect(spec: LatticeSpec, fn: SmoothFunction, interior: bool = True,
                       allow_fd: bool = True, slack: float = 0.1) -> DefectReport:
    """Sup-norm defect of the lattice Laplacian applied to samples of ``phi``.

    The potential cancels from ``H_V - H_{hbar,V}``. Fourth partials missing
    from ``fn`` are taken by central differences at spacing ``hbar / 8`` when
    ``allow_fd`` is set.
    """
    if fn.laplacian is None:
        raise ArgumentError("the analytic Laplacian of phi is required")
    if fn.fourth is None and not allow_fd:
        raise ArgumentError("fourth derivatives of phi are required")
    x = spec.positions()
    vals = np.asarray(fn.phi(x)).reshape(-1)
    lap_lattice = apply_discrete_laplacian(spec, vals) / spec.hbar**2
    lap_exact = np.asarray(fn.laplacian(x)).reshape(-1)
    diff = np.abs(lap_lattice - lap_exact)
    if interior:
        diff = diff[~spec.boundary_mask()]
    d = float(diff.max()) if diff.size else 0.0
    probe = _probe_points(spec)
    total = 0.0
    for j in range(spec.n):
        if fn.fourth is not None:
            d4 = np.asarray(fn.fourth[j](probe))
        else:
            d4 = _fd_fourth(fn.phi, probe, j, spec.hbar / 8)
        total += 2.0 * float(np.max(np.abs(d4)))
    bound = spec.hbar**2 / 24.0 * total
    return DefectReport(spec.hbar, d, bound, bool(d <= bound * (1 + slack) + 1e-10))


def gaussian_benchmark(n: int = 1, width: float = 1.0) -> SmoothFunction:
    """``exp(-|x|^2 / w^2)`` with exact Laplacian and fourth partials."""
    w2 = width * width

    def phi(x):
        return np.exp(-np.sum(x * x, axis=1) / w2)

    def lap(x):
        r2 = np.sum(x * x, axis=1)
        return phi(x) * (4 * r2 / w2**2 - 2 * n / w2)

    def d4(j):
        def f(x):
            y2 = x[:, j] ** 2 / w2
            # d^4/dy^4 exp(-y^2) = (16 y^4 - 48 y^2 + 12) exp(-y^2), y = x / w
            return phi(x) * (16 * y2**2 - 48 * y2 + 12) / w2**2
        return f

    return SmoothFunction(phi, lap, tuple(d4(j) for j in range(n)))


# --- lattice bookkeeping --------------------------------------------------------

def l2_norm(spec: LatticeSpec, values) -> float:
    """Quadrature-normalized norm ``hbar^(n/2) ||v||_2``."""
    return float(spec.hbar ** (spec.n / 2) * np.linalg.norm(np.asarray(values).reshape(-1)))


def restriction_indices(fine: LatticeSpec, coarse: LatticeSpec) -> np.ndarray:
    """Indices of the fine sites that coincide with the coarse sites."""
    ratio = coarse.hbar / fine.hbar
    r = int(round(ratio))
    if abs(ratio - r) > 1e-9 * ratio or r < 1:
        raise ArgumentError(f"spacing ratio {ratio:g} is not an integer")
    if coarse.n != fine.n or r * coarse.R > fine.R:
        raise ConfigError("sweep", "coarse lattice is not contained in the reference lattice")
    m = enumerate_sites(coarse) * r + fine.R
    return np.ravel_multi_index(tuple(m.T), fine.shape)


def restrict(fine: LatticeSpec, coarse: LatticeSpec, values) -> np.ndarray:
    values = np.asarray(values)
    return values[restriction_indices(fine, coarse), ...]


# --- sweeps -------------------------------------------------------------------

@dataclass(frozen=True)
class HbarSweep:
    """Shared continuum data solved on a family of spacings.

    ``potential`` and ``u0`` act on (points, n) coordinate arrays; ``source``
    (optional) is ``f(t, x)``. ``R = round(X / hbar)`` per spacing.
    """

    kernel: Kernel
    profile: CoefficientProfile
    potential: Callable
    V0: float
    u0: Callable
    grid: np.ndarray = field(compare=False)
    hbars: tuple = (0.4, 0.2, 0.1, 0.05)
    X: float = 6.0
    n: int = 1
    source: Callable | None = field(default=None, compare=False)

    def __post_init__(self):
        h = np.asarray(self.hbars, dtype=float)
        if h.size < 1 or np.any(h <= 0):
            raise ConfigError("lattice.sweep", "spacings must be positive")
        if np.any(np.diff(h) >= 0):
            raise ConfigError("lattice.sweep", "spacings must be strictly decreasing")
        if not self.X > 0:
            raise ConfigError("lattice.X", f"box half-width must be positive, got {self.X}")
        for hb in list(h) + [self.hbar_ref]:
            if abs(self.R_for(hb) * hb - self.X) > hb * (1 + 1e-9):
                raise ConfigError("lattice.X", f"box of half-width {self.X} is not covered within one spacing at hbar={hb}")

    @property
    def hbar_ref(self) -> float:
        return float(min(self.hbars)) / 2.0

    def R_for(self, hbar: float) -> int:
        return int(round(self.X / hbar))

    def spec_for(self, hbar: float) -> LatticeSpec:
        return LatticeSpec(self.n, hbar, self.R_for(hbar))


@dataclass
class LatticeRun:
    spec: LatticeSpec
    dec: SpectralDecomposition
    field: SolutionField


def _run(sweep: HbarSweep, hbar: float, profile: CoefficientProfile, grid: np.ndarray, threads: int) -> LatticeRun:
    spec = sweep.spec_for(hbar)
    pot = Potential.from_callable(spec, sweep.potential, sweep.V0)
    dec = eigendecompose(assemble_hamiltonian(spec, pot))
    u0 = np.asarray(sweep.u0(spec.positions())).reshape(-1)
    src = None if sweep.source is None else SourceTerm(site_fn=sweep.source)
    return LatticeRun(spec, dec, solve_full(sweep.kernel, dec, profile, u0, src, grid, threads=threads))


def sweep_errors(ref: LatticeRun, run: LatticeRun, s: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-time ``||v - u||_{H^{2+s}}`` and ``||D v - D u||_{H^s}`` on the coarse sites.

    Sobolev weights come from the coarse decomposition.
    """
    idx = restriction_indices(ref.spec, run.spec)
    Ur, Uc = ref.dec.U[idx], run.dec.U
    dv = ref.field.modes @ Ur.T - run.field.modes @ Uc.T  # (M+1, coarse sites)
    dc = ref.field.caputo @ Ur.T - run.field.caputo @ Uc.T
    scale = run.spec.hbar ** (run.spec.n / 2)
    wf = np.sqrt(sobolev_weights(run.dec, 2 + s))
    wc = np.sqrt(sobolev_weights(run.dec, s))
    ef = scale * np.linalg.norm((dv @ Uc) * wf, axis=1)
    ec = scale * np.linalg.norm((dc @ Uc) * wc, axis=1)
    return ef, ec


@dataclass
class ConvergenceTable:
    hbar: np.ndarray
    e_total: np.ndarray
    e_field: np.ndarray
    e_caputo: np.ndarray
    order: np.ndarray  # log2(e(h) / e(h / 2)); NaN for the last row
    flags: list = field(default_factory=list)

    @property
    def decreasing(self) -> bool:
        return bool(np.all(np.diff(self.e_total) < 0))

    def finest_orders(self, pairs: int = 2) -> np.ndarray:
        o = self.order[np.isfinite(self.order)]
        return o[-pairs:]

    def rows(self):
        for i in range(self.hbar.size):
            yield self.hbar[i], self.e_total[i], self.e_field[i], self.e_caputo[i], self.order[i]


def _orders(hbar: np.ndarray, e: np.ndarray) -> np.ndarray:
    out = np.full(hbar.size, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        for i in range(hbar.size - 1):
            out[i] = math.log(e[i] / e[i + 1]) / math.log(hbar[i] / hbar[i + 1]) if e[i + 1] > 0 and e[i] > 0 else np.nan
    return out


def semiclassical_sweep(sweep: HbarSweep, s: float = 0.0, profile: CoefficientProfile | None = None,
                        grid=None, threads: int = 1) -> ConvergenceTable:
    """Error of every spacing against the reference spacing ``hbar_min / 2``."""
    profile = profile or sweep.profile
    t = check_grid(sweep.grid if grid is None else grid)
    hs = [float(h) for h in sweep.hbars]
    all_h = hs + [sweep.hbar_ref]
    inner = max(1, threads // len(all_h)) if threads > 1 else 1
    if threads > 1:
        with ThreadPoolExecutor(max_workers=min(threads, len(all_h))) as pool:
            runs = list(pool.map(lambda h: _run(sweep, h, profile, t, inner), all_h))
    else:
        runs = [_run(sweep, h, profile, t, 1) for h in all_h]
    ref = runs[-1]
    et, ef, ec = [], [], []
    for run in runs[:-1]:
        f, c = sweep_errors(ref, run, s)
        et.append(float(np.max(f + c)))
        ef.append(float(np.max(f)))
        ec.append(float(np.max(c)))
    h = np.array(hs)
    et = np.array(et)
    return ConvergenceTable(h, et, np.array(ef), np.array(ec), _orders(h, et))


def veryweak_semiclassical_sweep(sweep: HbarSweep, coeff: DistributionalCoefficient, schedule: EpsilonSchedule,
                                 s: float = 0.0, eps: Sequence[float] | None = None,
                                 mollifier: Mollifier | None = None, min_nodes: int = 8,
                                 threads: int = 1) -> dict:
    """One convergence table per fixed ``eps`` with the mollified coefficient."""
    out = {}
    base = check_grid(sweep.grid)
    for e in (schedule.eps if eps is None else eps):
        om = schedule.omega(e)
        t, flags = resolve_grid(base, coeff, [e], schedule, min_nodes)
        a_eps = coeff.mollified(om, mollifier)
        ts = np.union1d(np.linspace(0.0, coeff.T, 10_000), t)
        vals = a_eps(ts)
        prof = CoefficientProfile(a_eps, coeff.T, float(vals.min()), float(vals.max()), label=f"eps={e:g}")
        if not prof.a0 > 0:
            raise InvalidCoefficientError(f"regularized coefficient is not positive at eps={e:g}")
        table = semiclassical_sweep(sweep, s, prof, t, threads)
        table.flags.extend(flags)
        out[e] = table
    return out
