"""Generalized L1 discretization of the Caputo-type derivative.

With ``u`` interpolated piecewise linearly on the grid ``t_0 < ... < t_M``,

    D u(t_m) = sum_{j<m} c_{m,j} (u_{j+1} - u_j),
    c_{m,j} = [G(t_m - t_j) - G(t_m - t_{j+1})] / (t_{j+1} - t_j),

where ``G`` is the running integral of the kernel. On a uniform grid the
weights only depend on ``m - j`` and are computed once.
"""

from __future__ import annotations

import numpy as np

from .errors import ArgumentError, NumericalError
from .kernels import Kernel


def uniform_grid(T: float, M: int) -> np.ndarray:
    if not T > 0 or M < 1:
        raise ArgumentError(f"need T > 0 and M >= 1, got T={T}, M={M}")
    return np.linspace(0.0, T, M + 1)


def graded_grid(T: float, M: int, gamma: float = 2.0) -> np.ndarray:
    """Nodes ``T (m/M)^gamma``, clustered near ``t = 0``."""
    if not gamma >= 1:
        raise ArgumentError(f"grading exponent must be >= 1, got {gamma}")
    return T * (np.arange(M + 1) / M) ** gamma


def check_grid(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise ArgumentError("time grid needs at least two nodes")
    if t[0] != 0.0:
        raise ArgumentError("time grid must start at 0")
    if not np.all(np.diff(t) > 0):
        raise ArgumentError("time grid must be strictly increasing")
    return t


def is_uniform(t: np.ndarray) -> bool:
    h = np.diff(t)
    return bool(np.allclose(h, h[0], rtol=1e-12, atol=0.0))


class L1Operator:
    """L1 weights for one kernel on one grid."""

    def __init__(self, kernel: Kernel, t):
        self.kernel = kernel
        self.t = check_grid(t)
        self.M = self.t.size - 1
        self.uniform = is_uniform(self.t)
        if self.uniform:
            h = self.t[1] - self.t[0]
            G = kernel.cumulative(h * np.arange(self.M + 1))
            # a[d] weights the increment d steps behind the newest one
            self._a = np.diff(G) / h
            self._rows = None
        else:
            self._a = None
            self._rows: dict[int, np.ndarray] | None = {}
        self._check_weights()

    def _check_weights(self):
        w = self._a if self.uniform else self.row(self.M)
        if not np.all(np.isfinite(w)):
            raise NumericalError("non-finite L1 weights; check the kernel's cumulative integral")

    def row(self, m: int) -> np.ndarray:
        """Weights ``c_{m,j}`` for ``j = 0..m-1``."""
        if self.uniform:
            return self._a[m - 1::-1] if m > 0 else self._a[:0]
        r = self._rows.get(m)
        if r is None:
            t = self.t
            G = self.kernel.cumulative(t[m] - t[: m + 1])
            r = (G[:-1] - G[1:]) / np.diff(t[: m + 1])
            self._rows[m] = r
        return r

    def apply(self, u) -> np.ndarray:
        """Discrete derivative at every node; row 0 is zero (no history)."""
        u = np.asarray(u)
        if u.shape[0] != self.M + 1:
            raise ArgumentError("trajectory length does not match the grid")
        du = np.diff(u, axis=0)
        out = np.zeros_like(u, dtype=np.result_type(u, float))
        for m in range(1, self.M + 1):
            out[m] = self.row(m) @ du[:m]
        return out

    def solve(self, lam, a_vals, f, u0) -> np.ndarray:
        """Implicit L1 stepping of ``D u + lam a(t) u = f`` for a batch of modes.

        ``lam`` and ``u0`` have shape (k,), ``a_vals`` shape (M+1,), ``f``
        shape (M+1, k) or None. Returns the (M+1, k) trajectory.
        """
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        u0 = np.atleast_1d(np.asarray(u0))
        a_vals = np.asarray(a_vals, dtype=float)
        dtype = np.result_type(u0, float if f is None else np.asarray(f), float)
        k = lam.size
        u = np.empty((self.M + 1, k), dtype=dtype)
        u[0] = u0
        du = np.empty((self.M, k), dtype=dtype)
        for m in range(1, self.M + 1):
            c = self.row(m)
            diag = c[m - 1]
            rhs = diag * u[m - 1]
            if m > 1:
                rhs = rhs - c[: m - 1] @ du[: m - 1]
            if f is not None:
                rhs = rhs + f[m]
            denom = diag + lam * a_vals[m]
            if np.any(denom <= 0):
                raise NumericalError(f"singular L1 step at t={self.t[m]}")
            u[m] = rhs / denom
            du[m - 1] = u[m] - u[m - 1]
        return u
