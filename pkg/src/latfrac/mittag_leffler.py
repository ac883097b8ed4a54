"""Two-parameter Mittag-Leffler function on the real axis.

E_{a,b}(z) = sum_k z^k / Gamma(a k + b)

The evaluator picks a branch per argument:

* double-precision Taylor series (exact summation via ``math.fsum``) while the
  largest term stays small enough that rounding cannot hurt;
* the algebraic asymptotic expansion for large negative ``z`` when its smallest
  term is below the target accuracy;
* for ``0 < a < 1, b = 1`` the real-line integral representation obtained by
  collapsing the Hankel contour onto the negative axis, done by adaptive
  quadrature;
* otherwise the Taylor series in extended precision (mpmath), with the working
  precision sized from the largest term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy import integrate, special

from .errors import AccuracyUnsupportedError, ArgumentError


@dataclass(frozen=True)
class MLParams:
    """Evaluation controls.

    ``series_log_peak`` is the log of the largest Taylor term allowed in the
    double-precision series (roughly ``|z|**(1/alpha)``); past it the series
    would lose digits to cancellation. ``positive_limit`` is the largest
    positive argument accepted.
    """

    alpha: float
    beta: float = 1.0
    series_log_peak: float = 9.0
    tol: float = 1e-10
    positive_limit: float = 50.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ArgumentError(f"alpha must be positive, got {self.alpha}")
        if not 1e-14 <= self.tol <= 1e-6:
            raise ArgumentError(f"tol must lie in [1e-14, 1e-6], got {self.tol}")


def _log_peak(alpha: float, z: float) -> float:
    # max_k |z|^k / Gamma(alpha k + beta) is roughly exp(|z|^(1/alpha)) / alpha
    return abs(z) ** (1.0 / alpha) - math.log(alpha) if z != 0 else 0.0


def _series_double(alpha: float, beta: float, z: float) -> tuple[float, float]:
    """Taylor series in double precision; returns (value, rounding estimate)."""
    nterms = 64
    while True:
        k = np.arange(nterms, dtype=float)
        arg = alpha * k + beta
        logmag = k * math.log(abs(z)) - special.gammaln(arg)
        sign_g = special.gammasgn(arg)
        sign_z = np.where((k % 2 == 1) & (z < 0), -1.0, 1.0)
        terms = sign_z * sign_g * np.exp(logmag)
        # poles of Gamma give 1/Gamma = 0
        terms[np.isinf(special.gammaln(arg)) | (sign_g == 0)] = 0.0
        tail = np.abs(terms[-8:])
        if tail.max() <= 1e-18 * max(1.0, np.abs(terms).max()) or nterms > 20000:
            value = math.fsum(terms.tolist())
            err = 4e-16 * float(np.abs(terms).max()) * math.sqrt(nterms)
            return value, err
        nterms *= 2


def _series_mp(alpha: float, beta: float, z: float, log_peak: float) -> float:
    dps = int((max(log_peak, 0.0) + 40.0) / math.log(10.0)) + 10
    with mpmath.workdps(dps):
        zz = mpmath.mpf(z)
        a = mpmath.mpf(alpha)
        b = mpmath.mpf(beta)
        total = mpmath.mpf(0)
        power = mpmath.mpf(1)
        eps = mpmath.mpf(10) ** (-dps + 5)
        k = 0
        small_run = 0
        while True:
            term = power * mpmath.rgamma(a * k + b)
            total += term
            # require several consecutive negligible terms past the peak
            if abs(term) <= eps * max(abs(total), mpmath.mpf(1)) and k > 2:
                small_run += 1
                if small_run >= 4:
                    break
            else:
                small_run = 0
            power *= zz
            k += 1
            if k > 200000:
                raise AccuracyUnsupportedError(f"series did not settle for z={z}")
        return float(total)


def _asymptotic(alpha: float, beta: float, z: float, kmax: int = 400):
    """Truncated expansion -sum_{k>=1} z^-k / Gamma(beta - alpha k).

    Returns (value, error estimate). Terms are summed up to the smallest one.
    """
    k = np.arange(1, kmax + 1, dtype=float)
    rg = special.rgamma(beta - alpha * k)
    logz = math.log(abs(z))
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        mags = np.where(rg == 0.0, 0.0, np.exp(-k * logz) * np.abs(rg))
    signs = np.sign(rg) * np.where((k % 2 == 1) & (z < 0), -1.0, 1.0)
    nz = mags > 0
    if not nz.any():
        return 0.0, math.inf
    # stop at the smallest non-zero term (divergent series)
    idx = np.flatnonzero(nz)
    jmin = idx[np.argmin(mags[idx])]
    terms = -(signs * mags)[: jmin + 1]
    value = math.fsum(terms.tolist())
    err = float(mags[jmin])
    later = idx[idx > jmin]
    if later.size:
        err = max(err, float(mags[later[0]]))
    if alpha >= 1.0:
        # exponentially small oscillatory contribution
        x = abs(z) ** (1.0 / alpha)
        err += math.exp(x * math.cos(math.pi / alpha)) / alpha
    return value, err


def _integral_beta1(alpha: float, x: float) -> float:
    """E_{alpha,1}(-x) for 0 < alpha < 1, x > 0 by the real-line integral."""
    s, c = math.sin(math.pi * alpha), math.cos(math.pi * alpha)
    inv = 1.0 / alpha

    def f(rho):
        return math.exp(-(rho**inv)) / (rho * rho + 2.0 * x * rho * c + x * x)

    kw = dict(epsabs=0.0, epsrel=1e-13, limit=400)
    knee = max(-x * c, 0.0)
    cut = max(2.0 * x, 4.0)
    part1, _ = integrate.quad(f, 0.0, cut, points=[knee] if 0 < knee < cut else None, **kw)
    part2, _ = integrate.quad(f, cut, math.inf, **kw)
    return x * s / (math.pi * alpha) * (part1 + part2)


def _scalar(alpha: float, beta: float, z: float, params: MLParams) -> float:
    if z == 0.0:
        return float(special.rgamma(beta))
    if not math.isfinite(z):
        raise ArgumentError(f"non-finite argument {z}")
    if z > params.positive_limit:
        raise AccuracyUnsupportedError(
            f"E_{{{alpha},{beta}}}({z}) lies outside the validated regime z <= {params.positive_limit}"
        )
    logp = _log_peak(alpha, z)
    if z > 0:
        # positive terms: no cancellation, double precision is enough
        return _series_double(alpha, beta, z)[0]
    if logp <= params.series_log_peak:
        value, err = _series_double(alpha, beta, z)
        if err <= 1e-2 * params.tol * abs(value):
            return value
    if alpha < 2.0:
        value, err = _asymptotic(alpha, beta, z)
        if err <= 1e-3 * params.tol * max(abs(value), 1e-300):
            return value
    if alpha < 1.0 and beta == 1.0:
        return _integral_beta1(alpha, -z)
    return _series_mp(alpha, beta, z, logp)


def mittag_leffler(alpha: float, beta: float, z, tol: float = 1e-10):
    """Evaluate E_{alpha,beta}(z) for real ``z`` (scalar or array).

    Raises :class:`AccuracyUnsupportedError` for ``z`` beyond the positive
    limit of :class:`MLParams`.
    """
    params = MLParams(alpha=alpha, beta=beta, tol=tol)
    arr = np.asarray(z, dtype=float)
    if arr.ndim == 0:
        return _scalar(alpha, beta, float(arr), params)
    out = np.empty_like(arr)
    flat = arr.ravel()
    res = out.ravel()
    cache: dict[float, float] = {}
    for i, zi in enumerate(flat.tolist()):
        v = cache.get(zi)
        if v is None:
            v = cache[zi] = _scalar(alpha, beta, zi, params)
        res[i] = v
    return out


def mittag_leffler_series(alpha: float, beta: float, z: float) -> float:
    """Series branch alone (extended precision when terms are large)."""
    logp = _log_peak(alpha, z)
    if z > 0 or logp <= MLParams.series_log_peak:
        return _series_double(alpha, beta, z)[0]
    return _series_mp(alpha, beta, z, logp)


def mittag_leffler_asymptotic(alpha: float, beta: float, z: float) -> tuple[float, float]:
    """Asymptotic branch alone for ``z < 0``; returns (value, error estimate)."""
    if not z < 0:
        raise ArgumentError("asymptotic expansion is used on the negative axis only")
    return _asymptotic(alpha, beta, z)
