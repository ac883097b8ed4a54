"""Truncated lattice hbar*Z^n, potentials and the discrete Schrodinger operator.

Sites are ``k = hbar * m`` with integer ``m``, ``max|m_j| <= R``, enumerated
lexicographically. Values outside the box are taken to be zero, so the
nearest-neighbour Laplacian keeps its five-point (2n+1-point) form everywhere
and the assembled matrix stays symmetric positive definite.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping

import numpy as np
from scipy import sparse

from .errors import ArgumentError, InvalidPotentialError, ResourceError

SITE_CAP = 10**6
SPARSE_THRESHOLD = 10**4


class ConfinementWarning(UserWarning):
    """Potential does not grow towards the box boundary."""


@dataclass(frozen=True)
class LatticeSpec:
    n: int
    hbar: float
    R: int
    boundary: str = "dirichlet"
    site_cap: int = SITE_CAP

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ArgumentError(f"dimension must be a positive integer, got {self.n}")
        if not self.hbar > 0:
            raise ArgumentError(f"hbar must be positive, got {self.hbar}")
        if int(self.R) != self.R or self.R < 0:
            raise ArgumentError(f"radius must be a nonnegative integer, got {self.R}")
        if self.boundary != "dirichlet":
            raise ArgumentError("only Dirichlet (zero extension) boundaries are supported")

    @property
    def side(self) -> int:
        return 2 * self.R + 1

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.side,) * self.n

    @property
    def size(self) -> int:
        return self.side**self.n

    def positions(self) -> np.ndarray:
        """Physical coordinates, shape (sites, n)."""
        return self.hbar * enumerate_sites(self).astype(float)

    def index(self, m) -> int:
        """Linear index of a multi-index (inverse of the enumeration)."""
        m = np.asarray(m, dtype=int) + self.R
        if np.any(m < 0) or np.any(m >= self.side):
            raise ArgumentError(f"multi-index {m - self.R} lies outside the box")
        return int(np.ravel_multi_index(tuple(m), self.shape))

    def boundary_mask(self) -> np.ndarray:
        """True on the outermost shell (some |m_j| = R)."""
        return np.any(np.abs(enumerate_sites(self)) == self.R, axis=1)


def enumerate_sites(spec: LatticeSpec) -> np.ndarray:
    """All multi-indices of the box in lexicographic order, shape (sites, n)."""
    if spec.size > spec.site_cap:
        raise ResourceError(f"{spec.size} sites exceed the cap of {spec.site_cap}")
    axes = [np.arange(-spec.R, spec.R + 1)] * spec.n
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def apply_discrete_laplacian(spec: LatticeSpec, u) -> np.ndarray:
    """sum_j [u(k + hbar v_j) + u(k - hbar v_j)] - 2n u(k), zero outside the box."""
    u = np.asarray(u)
    if u.shape != (spec.size,):
        raise ArgumentError(f"expected a vector of {spec.size} site values, got shape {u.shape}")
    grid = u.reshape(spec.shape)
    out = -2.0 * spec.n * grid
    for ax in range(spec.n):
        lo = [slice(None)] * spec.n
        hi = [slice(None)] * spec.n
        lo[ax] = slice(0, -1)
        hi[ax] = slice(1, None)
        out[tuple(lo)] += grid[tuple(hi)]
        out[tuple(hi)] += grid[tuple(lo)]
    return out.reshape(-1)


class PotentialKind(str, Enum):
    CONSTANT = "constant"
    POLYNOMIAL = "polynomial"
    TABULATED = "tabulated"


@dataclass(frozen=True)
class Potential:
    """Positive potential with floor ``V0``.

    ``coefficients`` maps exponent tuples to coefficients for the polynomial
    kind, e.g. ``{(0,): 1.0, (2,): 1.0}`` is ``1 + x^2``. ``values`` holds one
    value per site for the tabulated kind.
    """

    kind: PotentialKind
    V0: float
    coefficients: Mapping[tuple[int, ...], float] = field(default_factory=dict)
    values: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.V0 > 0:
            raise InvalidPotentialError(f"potential floor V0 must be positive, got {self.V0}")

    @classmethod
    def constant(cls, V0: float) -> "Potential":
        return cls(PotentialKind.CONSTANT, V0)

    @classmethod
    def polynomial(cls, coefficients: Mapping[tuple[int, ...], float], V0: float | None = None) -> "Potential":
        coeffs = {tuple(int(e) for e in k): float(v) for k, v in coefficients.items()}
        if V0 is None:
            V0 = coeffs.get(tuple([0] * len(next(iter(coeffs)))), 0.0) if coeffs else 0.0
        return cls(PotentialKind.POLYNOMIAL, V0, coeffs)

    @classmethod
    def tabulated(cls, values, V0: float) -> "Potential":
        return cls(PotentialKind.TABULATED, V0, values=np.asarray(values, dtype=float))

    @classmethod
    def from_callable(cls, spec: LatticeSpec, fn: Callable, V0: float) -> "Potential":
        """Tabulate ``fn`` (acting on an (sites, n) coordinate array) on ``spec``."""
        return cls.tabulated(sample_function(spec, fn), V0)

    def evaluate(self, spec: LatticeSpec) -> np.ndarray:
        if self.kind == PotentialKind.CONSTANT:
            return np.full(spec.size, float(self.V0))
        if self.kind == PotentialKind.TABULATED:
            if self.values.shape != (spec.size,):
                raise ArgumentError("tabulated potential does not match the lattice size")
            return self.values.copy()
        x = spec.positions()
        v = np.zeros(spec.size)
        for expo, c in self.coefficients.items():
            if len(expo) != spec.n:
                raise ArgumentError(f"monomial {expo} does not match dimension {spec.n}")
            term = np.full(spec.size, c)
            for j, e in enumerate(expo):
                term = term * x[:, j] ** e
            v += term
        return v


def sample_function(spec: LatticeSpec, fn: Callable) -> np.ndarray:
    x = spec.positions()
    vals = np.asarray(fn(x))
    if vals.shape == ():
        vals = np.full(spec.size, vals)
    vals = vals.reshape(spec.size)
    if not np.all(np.isfinite(vals)):
        raise ArgumentError("function is not finite at every lattice site")
    return vals


@dataclass(frozen=True)
class HamiltonianMatrix:
    spec: LatticeSpec
    potential: Potential
    V: np.ndarray = field(compare=False)
    matrix: object = field(compare=False)  # ndarray or scipy CSR

    @property
    def is_sparse(self) -> bool:
        return sparse.issparse(self.matrix)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray() if self.is_sparse else self.matrix

    def apply(self, u) -> np.ndarray:
        return -apply_discrete_laplacian(self.spec, u) / self.spec.hbar**2 + self.V * np.asarray(u)


def _neighbour_pairs(spec: LatticeSpec):
    idx = np.arange(spec.size).reshape(spec.shape)
    for ax in range(spec.n):
        lo = [slice(None)] * spec.n
        hi = [slice(None)] * spec.n
        lo[ax] = slice(0, -1)
        hi[ax] = slice(1, None)
        yield idx[tuple(lo)].ravel(), idx[tuple(hi)].ravel()


def assemble_hamiltonian(spec: LatticeSpec, pot: Potential, sparse_threshold: int = SPARSE_THRESHOLD) -> HamiltonianMatrix:
    """Build ``-hbar^-2 L + V``; raises if ``V`` drops below its floor."""
    enumerate_sites(spec)  # enforces the site cap
    V = pot.evaluate(spec)
    if not np.all(np.isfinite(V)):
        raise InvalidPotentialError("potential is not finite on the lattice")
    low = np.flatnonzero(V < pot.V0)
    if low.size:
        i = int(low[0])
        raise InvalidPotentialError(
            f"V = {V[i]:.6g} at site {enumerate_sites(spec)[i].tolist()} is below the floor V0 = {pot.V0}"
        )
    _confinement_diagnostic(spec, pot, V)
    h2 = 1.0 / spec.hbar**2
    diag = 2.0 * spec.n * h2 + V
    off = -h2
    if spec.size > sparse_threshold:
        rows, cols = [np.arange(spec.size)], [np.arange(spec.size)]
        vals = [diag]
        for a, b in _neighbour_pairs(spec):
            rows += [a, b]
            cols += [b, a]
            vals += [np.full(a.size, off)] * 2
        mat = sparse.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(spec.size,) * 2
        )
    else:
        mat = np.zeros((spec.size, spec.size))
        mat[np.diag_indices(spec.size)] = diag
        for a, b in _neighbour_pairs(spec):
            mat[a, b] = off
            mat[b, a] = off
    return HamiltonianMatrix(spec, pot, V, mat)


def _confinement_diagnostic(spec: LatticeSpec, pot: Potential, V: np.ndarray):
    if pot.kind != PotentialKind.POLYNOMIAL or spec.R == 0:
        return
    shell = spec.boundary_mask()
    if V[shell].max() <= V[~shell].max():
        warnings.warn(
            "potential does not grow towards the box boundary; the truncated problem may not be confining",
            ConfinementWarning,
            stacklevel=3,
        )


def truncation_mass(spec: LatticeSpec, u) -> float:
    """Fraction of the squared l2 mass of ``u`` at sites with max|m_j| > R/2."""
    u = np.asarray(u)
    far = np.max(np.abs(enumerate_sites(spec)), axis=1) > spec.R / 2
    total = float(np.sum(np.abs(u) ** 2))
    return float(np.sum(np.abs(u[far]) ** 2)) / total if total > 0 else 0.0
