"""Eigenbasis of the lattice Hamiltonian and the transforms built on it."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ArgumentError, NumericalError, ResourceError
from .lattice import HamiltonianMatrix, LatticeSpec, sample_function

DENSE_LIMIT = 4000


@dataclass(frozen=True)
class SpectralDecomposition:
    """Ascending eigenvalues and orthonormal eigenvectors (columns of ``U``)."""

    eigenvalues: np.ndarray
    U: np.ndarray = field(repr=False)
    spec: LatticeSpec | None = None

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def size(self) -> int:
        return self.eigenvalues.size


def _fix_signs(U: np.ndarray) -> np.ndarray:
    # first component that is clearly nonzero becomes positive
    tol = 1e-10 * np.max(np.abs(U), axis=0)
    first = np.argmax(np.abs(U) > tol[None, :], axis=0)
    signs = np.sign(U[first, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs[None, :]


def eigendecompose(H: HamiltonianMatrix, orth_tol: float = 1e-10, res_tol: float = 1e-9) -> SpectralDecomposition:
    """Full symmetric eigendecomposition (LAPACK ``syevr``), checked afterwards."""
    if H.spec.size > DENSE_LIMIT:
        raise ResourceError(
            f"{H.spec.size} sites exceed the dense eigensolver limit of {DENSE_LIMIT}; reduce R"
        )
    A = H.dense()
    try:
        lam, U = scipy.linalg.eigh(A, driver="evr")
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"symmetric eigensolver failed: {exc}") from exc
    order = np.argsort(lam, kind="stable")
    lam, U = lam[order], _fix_signs(U[:, order])
    orth = np.max(np.abs(U.T @ U - np.eye(lam.size)))
    res = np.linalg.norm(A @ U - U * lam[None, :], axis=0)
    if orth > orth_tol or np.any(res > res_tol * (1.0 + np.abs(lam))):
        raise NumericalError(
            f"eigendecomposition failed its checks: orthogonality error {orth:.3g}, "
            f"worst scaled residual {np.max(res / (1 + np.abs(lam))):.3g}"
        )
    return SpectralDecomposition(lam, U, H.spec)


def forward_transform(dec: SpectralDecomposition, f) -> np.ndarray:
    """Mode coefficients ``U^T f``; ``f`` may be a vector or (sites, k) batch."""
    f = np.asarray(f)
    if f.shape[0] != dec.U.shape[0]:
        raise ArgumentError(f"expected {dec.U.shape[0]} site values, got {f.shape[0]}")
    return dec.U.T @ f


def inverse_transform(dec: SpectralDecomposition, fhat) -> np.ndarray:
    fhat = np.asarray(fhat)
    if fhat.shape[0] != dec.size:
        raise ArgumentError(f"expected {dec.size} mode coefficients, got {fhat.shape[0]}")
    return dec.U @ fhat


def sobolev_weights(dec: SpectralDecomposition, s: float) -> np.ndarray:
    return (1.0 + dec.eigenvalues) ** s


def sobolev_norm(dec: SpectralDecomposition, fhat, s: float) -> float | np.ndarray:
    """``(sum (1 + lam)^s |fhat|^2)^(1/2)``; a 2-D input gives one norm per row."""
    fhat = np.asarray(fhat)
    if fhat.shape[-1] != dec.size:
        raise ArgumentError(f"expected {dec.size} mode coefficients, got {fhat.shape[-1]}")
    w = sobolev_weights(dec, s)
    out = np.sqrt(np.sum(w * np.abs(fhat) ** 2, axis=-1))
    return float(out) if out.ndim == 0 else out


def sample_continuum(spec: LatticeSpec, phi) -> np.ndarray:
    """Values ``phi(hbar m)``; ``phi`` receives an (sites, n) coordinate array."""
    return sample_function(spec, phi)
