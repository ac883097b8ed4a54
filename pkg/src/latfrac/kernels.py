"""Caputo-type memory kernels.

A kernel ``g`` defines the nonlocal derivative

    D u(t) = int_0^t g(t - s) u'(s) ds.

Each kernel exposes its Laplace transform (the "symbol", also valid for
complex arguments so it can be used on inversion contours), the kernel
density ``g(t)`` and its running integral ``G(t) = int_0^t g``, which is what
the L1 time stepper consumes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import ArgumentError
from .mittag_leffler import mittag_leffler


class KernelKind(str, Enum):
    CD = "cd"  # power law t^-alpha / Gamma(1-alpha)
    CF = "cf"  # exponential
    AB = "ab"  # Mittag-Leffler
    CUSTOM = "custom"


@dataclass(frozen=True)
class Kernel:
    """Immutable kernel description; build with the factory functions below."""

    kind: KernelKind
    alpha: float | None = None
    norm: float = 1.0  # M(alpha) for CF, B(alpha) for AB
    laplace: Callable | None = field(default=None, compare=False)
    density_fn: Callable | None = field(default=None, compare=False)
    cumulative_fn: Callable | None = field(default=None, compare=False)
    name: str = ""

    def __post_init__(self):
        if self.kind != KernelKind.CUSTOM:
            if self.alpha is None or not 0.0 < self.alpha < 1.0:
                raise ArgumentError(f"alpha must lie strictly inside (0, 1), got {self.alpha}")
            if not self.norm > 0:
                raise ArgumentError(f"normalization must be positive, got {self.norm}")
        elif self.laplace is None:
            raise ArgumentError("a custom kernel needs its Laplace transform")

    @property
    def rate(self) -> float:
        """alpha / (1 - alpha), the decay rate of the CF and AB kernels."""
        return self.alpha / (1.0 - self.alpha)

    def symbol(self, p):
        """Laplace transform at ``p``; arithmetic only, so complex and mpmath work."""
        a = self.alpha
        if self.kind == KernelKind.CD:
            return p ** (a - 1.0)
        if self.kind == KernelKind.CF:
            return (self.norm / (1.0 - a)) / (p + self.rate)
        if self.kind == KernelKind.AB:
            return (self.norm / (1.0 - a)) * p ** (a - 1.0) / (p**a + self.rate)
        return self.laplace(p)

    def density(self, t):
        """Kernel value ``g(t)`` for ``t > 0``."""
        t = np.asarray(t, dtype=float)
        a = self.alpha
        if self.kind == KernelKind.CD:
            return t ** (-a) / math.gamma(1.0 - a)
        if self.kind == KernelKind.CF:
            return self.norm / (1.0 - a) * np.exp(-self.rate * t)
        if self.kind == KernelKind.AB:
            return self.norm / (1.0 - a) * mittag_leffler(a, 1.0, -self.rate * t**a)
        if self.density_fn is None:
            raise ArgumentError("custom kernel has no time-domain density")
        return np.asarray(self.density_fn(t), dtype=float)

    def cumulative(self, t):
        """Running integral ``G(t)``; ``G(0) = 0``."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ArgumentError("cumulative integral needs t >= 0")
        a = self.alpha
        if self.kind == KernelKind.CD:
            return t ** (1.0 - a) / math.gamma(2.0 - a)
        if self.kind == KernelKind.CF:
            return self.norm / a * -np.expm1(-self.rate * t)
        if self.kind == KernelKind.AB:
            # int_0^t E_a(-c s^a) ds = t E_{a,2}(-c t^a)
            return self.norm / (1.0 - a) * t * mittag_leffler(a, 2.0, -self.rate * t**a)
        if self.cumulative_fn is not None:
            return np.asarray(self.cumulative_fn(t), dtype=float)
        return _quad_cumulative(self.density, t)


def _quad_cumulative(g: Callable, t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t)
    flat = out.ravel()
    for i, ti in enumerate(t.ravel().tolist()):
        if ti > 0:
            val, _ = integrate.quad(lambda s: float(g(s)), 0.0, ti, epsabs=1e-13, epsrel=1e-11, limit=200)
            flat[i] = val
    return out


def caputo_dzhrbashyan(alpha: float) -> Kernel:
    return Kernel(KernelKind.CD, alpha, name=f"cd(alpha={alpha})")


def caputo_fabrizio(alpha: float, m: float = 1.0) -> Kernel:
    return Kernel(KernelKind.CF, alpha, norm=m, name=f"cf(alpha={alpha}, m={m})")


def atangana_baleanu(alpha: float, b: float = 1.0) -> Kernel:
    return Kernel(KernelKind.AB, alpha, norm=b, name=f"ab(alpha={alpha}, b={b})")


def custom_kernel(laplace: Callable, density: Callable | None = None,
                  cumulative: Callable | None = None, alpha: float | None = None,
                  name: str = "custom") -> Kernel:
    """Kernel given by its Laplace transform.

    ``cumulative`` is used directly when supplied; otherwise ``G`` is obtained
    by adaptive quadrature of ``density``.
    """
    return Kernel(KernelKind.CUSTOM, alpha, laplace=laplace, density_fn=density,
                  cumulative_fn=cumulative, name=name)


def laplace_transform(kernel: Kernel, p):
    """Kernel Laplace transform at real ``p > 0``."""
    arr = np.asarray(p, dtype=float)
    if np.any(arr <= 0):
        raise ArgumentError("Laplace variable must be positive")
    return kernel.symbol(arr) if arr.ndim else float(kernel.symbol(float(arr)))


def cumulative_integral(kernel: Kernel, t):
    """``G(t) = int_0^t g`` for ``t > 0``."""
    arr = np.asarray(t, dtype=float)
    if np.any(arr <= 0):
        raise ArgumentError("cumulative integral is defined for t > 0")
    out = kernel.cumulative(arr)
    return out if arr.ndim else float(out)


# --- admissibility ---------------------------------------------------------

PROBE_GRID = np.logspace(-3, 3, 25)


@dataclass
class AdmissibilityReport:
    positive: bool
    nonincreasing: bool
    p_symbol_increasing: bool
    completely_monotone: bool
    worst_cm_violation: float
    decay_at_infinity: bool  # symbol -> 0 as p -> oo
    growth_at_infinity: bool  # p * symbol -> oo as p -> oo
    blowup_at_zero: bool  # symbol -> oo as p -> 0
    vanishing_at_zero: bool  # p * symbol -> 0 as p -> 0
    flags: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        """Structural probe: positivity, monotonicity and divided-difference signs."""
        return self.positive and self.nonincreasing and self.p_symbol_increasing and self.completely_monotone

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["passed"] = self.passed
        return d


def _loglog_slope(p: np.ndarray, f: np.ndarray, at_end: bool, decades: float = 1.0) -> float:
    lp = np.log(p)
    if at_end:
        sel = lp >= lp[-1] - decades * math.log(10.0)
    else:
        sel = lp <= lp[0] + decades * math.log(10.0)
    x, y = lp[sel], np.log(f[sel])
    return float((y[-1] - y[0]) / (x[-1] - x[0]))


def _divided_differences(x: np.ndarray, f: np.ndarray, order: int) -> np.ndarray:
    d = f.copy()
    for m in range(1, order + 1):
        d = (d[1:] - d[:-1]) / (x[m:] - x[:-m])
    return d


def check_admissibility(kernel: Kernel, probe: np.ndarray | None = None,
                        slope_floor: float = 1e-2, cm_tol: float = 1e-8) -> AdmissibilityReport:
    """Probe-grid check of the Stieltjes-type conditions on the kernel symbol.

    Limits are judged by the log-log slope over the outermost decade: a
    quantity "tends to infinity" (or zero) when its slope there has the right
    sign and exceeds ``slope_floor`` in magnitude. This is a numerical
    heuristic; a saturating function whose knee lies beyond the probe grid
    passes.
    """
    p = PROBE_GRID if probe is None else np.asarray(probe, dtype=float)
    with np.errstate(all="ignore"):
        g = np.asarray(laplace_transform(kernel, p), dtype=float)
    pg = p * g
    positive = bool(np.all(np.isfinite(g)) and np.all(g > 0))
    nonincreasing = bool(np.all(np.diff(g) <= 1e-12 * np.abs(g[:-1])))
    p_incr = bool(np.all(np.diff(pg) > 0))

    worst = 0.0
    cm_ok = positive
    if positive:
        for m in range(1, 5):
            d = ((-1) ** m) * _divided_differences(p, g, m)
            scale = np.max(np.abs(d)) or 1.0
            v = float(np.min(d) / scale)
            worst = min(worst, v)
            cm_ok = cm_ok and v >= -cm_tol

    flags: list[str] = []
    if positive:
        dec_inf = _loglog_slope(p, g, True) <= -slope_floor
        grow_inf = _loglog_slope(p, pg, True) >= slope_floor
        blow_0 = _loglog_slope(p, g, False) <= -slope_floor
        van_0 = _loglog_slope(p, pg, False) >= slope_floor
    else:
        dec_inf = grow_inf = blow_0 = van_0 = False
    if not (dec_inf and grow_inf):
        flags.append("condition (3) not satisfied at probe ends")
    if not (blow_0 and van_0):
        flags.append("condition (4) not satisfied at probe ends")
    if not positive:
        flags.append("symbol not positive and finite on the probe grid")
    if not nonincreasing:
        flags.append("symbol increases on the probe grid")
    if not p_incr:
        flags.append("p * symbol not increasing on the probe grid")
    if positive and not cm_ok:
        flags.append("divided differences break the completely monotone sign pattern")
    return AdmissibilityReport(positive, nonincreasing, p_incr, cm_ok, worst,
                               dec_inf, grow_inf, blow_0, van_0, flags)
