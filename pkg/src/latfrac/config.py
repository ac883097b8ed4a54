"""Experiment configuration: YAML parsing, validation and named presets.

Validation runs before any compute and reports the first offending key as a
dotted path (``kernel.alpha``). Coefficients, potentials, sources and
initial data are chosen from named presets; anything else needs the library
API.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .errors import ConfigError
from .kernels import Kernel, atangana_baleanu, caputo_dzhrbashyan, caputo_fabrizio
from .l1 import graded_grid, uniform_grid
from .lattice import LatticeSpec, Potential
from .solver import CoefficientProfile, SourceTerm
from .veryweak import Atom, DistributionalCoefficient, EpsilonSchedule, Jump, Mollifier

EXPERIMENTS = ("relax", "solve", "verify", "veryweak", "uniqueness", "consistency",
               "semiclassical", "veryweak-semiclassical", "admissibility")

# blocks each experiment needs (beyond kernel and time, which all but admissibility need)
REQUIRED = {
    "relax": ("kernel", "time"),
    "solve": ("kernel", "time", "lattice", "potential", "coefficient", "data"),
    "verify": ("kernel", "time", "lattice", "potential"),
    "veryweak": ("kernel", "time", "lattice", "potential", "coefficient", "data", "epsilon"),
    "uniqueness": ("kernel", "time", "lattice", "potential", "coefficient", "data", "epsilon"),
    "consistency": ("kernel", "time", "lattice", "potential", "coefficient", "data", "epsilon"),
    "semiclassical": ("kernel", "time", "lattice", "potential", "coefficient", "data"),
    "veryweak-semiclassical": ("kernel", "time", "lattice", "potential", "coefficient", "data", "epsilon"),
    "admissibility": ("kernel",),
}

KNOWN_BLOCKS = {"experiment", "kernel", "time", "lattice", "potential", "coefficient", "source", "data",
                "sobolev", "epsilon", "output", "seed", "relax", "verify", "uniqueness", "consistency"}


def _block(raw: dict, key: str) -> dict:
    val = raw.get(key)
    if val is None:
        return {}
    if not isinstance(val, dict):
        raise ConfigError(key, "expected a mapping")
    return val


def _num(block: dict, path: str, key: str, default=None, positive=False, integer=False, lo=None, hi=None):
    full = f"{path}.{key}"
    if key not in block:
        if default is None:
            raise ConfigError(full, "missing")
        return default
    val = block[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(full, f"expected a number, got {val!r}")
    if integer and int(val) != val:
        raise ConfigError(full, f"expected an integer, got {val!r}")
    if not math.isfinite(val):
        raise ConfigError(full, "must be finite")
    if positive and not val > 0:
        raise ConfigError(full, f"must be positive, got {val}")
    if lo is not None and val <= lo:
        raise ConfigError(full, f"must exceed {lo}, got {val}")
    if hi is not None and val >= hi:
        raise ConfigError(full, f"must be below {hi}, got {val}")
    return int(val) if integer else float(val)


def _kind(block: dict, path: str, allowed: tuple, default=None) -> str:
    k = block.get("kind", default)
    if k is None:
        raise ConfigError(f"{path}.kind", "missing")
    if k not in allowed:
        raise ConfigError(f"{path}.kind", f"unknown value {k!r}; expected one of {', '.join(allowed)}")
    return k


def _unknown(block: dict, path: str, allowed: set):
    for k in block:
        if k not in allowed:
            raise ConfigError(f"{path}.{k}", "unknown key")


@dataclass(frozen=True)
class KernelCfg:
    kind: str
    alpha: float
    norm: float

    def build(self) -> Kernel:
        if self.kind == "cd":
            return caputo_dzhrbashyan(self.alpha)
        if self.kind == "cf":
            return caputo_fabrizio(self.alpha, self.norm)
        return atangana_baleanu(self.alpha, self.norm)


@dataclass(frozen=True)
class TimeCfg:
    T: float
    M: int
    grading: float

    def grid(self) -> np.ndarray:
        if self.grading == 1.0:
            return uniform_grid(self.T, self.M)
        return graded_grid(self.T, self.M, self.grading)


@dataclass(frozen=True)
class LatticeCfg:
    n: int
    hbar: float | None
    R: int | None
    sweep: tuple
    X: float

    def spec(self) -> LatticeSpec:
        return LatticeSpec(self.n, self.hbar, self.R)


@dataclass(frozen=True)
class PotentialCfg:
    kind: str
    V0: float
    omega: float

    def function(self):
        V0, w2 = self.V0, self.omega**2
        if self.kind == "constant":
            return lambda x: np.full(x.shape[0], V0)
        return lambda x: V0 + w2 * np.sum(x * x, axis=1)

    def build(self, spec: LatticeSpec) -> Potential:
        if self.kind == "constant":
            return Potential.constant(self.V0)
        coeffs = {tuple([0] * spec.n): self.V0}
        for j in range(spec.n):
            e = [0] * spec.n
            e[j] = 2
            coeffs[tuple(e)] = self.omega**2
        return Potential.polynomial(coeffs, self.V0)


@dataclass(frozen=True)
class CoefficientCfg:
    kind: str
    params: dict = field(default_factory=dict)
    atoms: tuple = ()
    jumps: tuple = ()

    @property
    def is_distributional(self) -> bool:
        return self.kind == "distributional"

    def function(self):
        p = self.params
        if self.kind == "constant":
            v = p["value"]
            return lambda t: np.full_like(np.asarray(t, dtype=float), v)
        if self.kind == "linear":
            a0, sl = p["a0"], p["slope"]
            return lambda t: a0 + sl * np.asarray(t, dtype=float)
        if self.kind == "sinusoidal":
            m, amp, fr = p["mean"], p["amplitude"], p["frequency"]
            return lambda t: m + amp * np.sin(2 * np.pi * fr * np.asarray(t, dtype=float))
        if self.kind == "kink":
            a0, sl, c = p["a0"], p["slope"], p["center"]
            return lambda t: a0 + sl * np.abs(np.asarray(t, dtype=float) - c)
        raise ConfigError("coefficient.kind", f"{self.kind!r} has no classical form")

    def profile(self, T: float) -> CoefficientProfile:
        return CoefficientProfile.regular(self.function(), T, label=self.kind)

    def distribution(self, T: float) -> DistributionalCoefficient:
        if self.is_distributional:
            return DistributionalCoefficient(T=T, a0=self.params["a0"],
                                             atoms=tuple(Atom(*a) for a in self.atoms),
                                             jumps=tuple(Jump(*j) for j in self.jumps))
        prof = self.profile(T)
        return DistributionalCoefficient(T=T, smooth=self.function(), a0=prof.a0)


@dataclass(frozen=True)
class SourceCfg:
    kind: str
    amplitude: float
    frequency: float
    width: float

    def site_fn(self):
        if self.kind == "zero":
            return None
        amp, fr, w2 = self.amplitude, self.frequency, self.width**2
        return lambda t, x: amp * math.cos(2 * math.pi * fr * t) * np.exp(-np.sum(x * x, axis=1) / w2)

    def build(self) -> SourceTerm | None:
        fn = self.site_fn()
        return None if fn is None else SourceTerm(site_fn=fn)


@dataclass(frozen=True)
class DataCfg:
    kind: str
    width: float
    center: float
    amplitude: float
    index: int
    radius: float

    def function(self):
        if self.kind == "gaussian":
            w2, c, a = self.width**2, self.center, self.amplitude
            return lambda x: a * np.exp(-np.sum((x - c) ** 2, axis=1) / w2)
        if self.kind == "indicator":
            r, a = self.radius, self.amplitude
            return lambda x: a * (np.max(np.abs(x), axis=1) <= r + 1e-12).astype(float)
        raise ConfigError("data.kind", "eigenmode data depends on the lattice and has no continuum form")

    def sample(self, spec: LatticeSpec, dec=None) -> np.ndarray:
        if self.kind == "eigenmode":
            if self.index >= spec.size:
                raise ConfigError("data.index", f"lattice has only {spec.size} modes")
            return self.amplitude * dec.U[:, self.index].copy()
        return np.asarray(self.function()(spec.positions()), dtype=float).reshape(-1)


@dataclass(frozen=True)
class EpsilonCfg:
    k_min: int
    k_max: int
    L1: int
    mollifier: str
    values: tuple | None  # subset used by veryweak-semiclassical

    def schedule(self) -> EpsilonSchedule:
        return EpsilonSchedule.geometric(self.k_min, self.k_max, self.L1)

    def build_mollifier(self) -> Mollifier:
        return Mollifier(self.mollifier)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    raw: dict
    kernel: KernelCfg | None = None
    time: TimeCfg | None = None
    lattice: LatticeCfg | None = None
    potential: PotentialCfg | None = None
    coefficient: CoefficientCfg | None = None
    source: SourceCfg | None = None
    data: DataCfg | None = None
    s: float = 0.0
    epsilon: EpsilonCfg | None = None
    output: str = "out"
    seed: int = 0
    extra: dict = field(default_factory=dict)


# --- block parsers ------------------------------------------------------------

def _parse_kernel(b: dict) -> KernelCfg:
    _unknown(b, "kernel", {"type", "alpha", "m", "b"})
    if b.get("type") == "custom":
        raise ConfigError("kernel.type", "custom kernels need the library API")
    kind = b.get("type")
    if kind is None:
        raise ConfigError("kernel.type", "missing")
    if kind not in ("cd", "cf", "ab"):
        raise ConfigError("kernel.type", f"unknown value {kind!r}; expected one of cd, cf, ab")
    alpha = _num(b, "kernel", "alpha", lo=0.0, hi=1.0)
    norm = 1.0
    if kind == "cf":
        norm = _num(b, "kernel", "m", 1.0, positive=True)
    elif kind == "ab":
        norm = _num(b, "kernel", "b", 1.0, positive=True)
    return KernelCfg(kind, alpha, norm)


def _parse_time(b: dict) -> TimeCfg:
    _unknown(b, "time", {"T", "M", "grading"})
    T = _num(b, "time", "T", 1.0, positive=True)
    M = _num(b, "time", "M", 512, integer=True, positive=True)
    g = _num(b, "time", "grading", 1.0, positive=True)
    if g < 1.0:
        raise ConfigError("time.grading", f"grading exponent must be at least 1, got {g}")
    return TimeCfg(T, M, g)


def _parse_lattice(b: dict, sweep_mode: bool) -> LatticeCfg:
    _unknown(b, "lattice", {"n", "hbar", "R", "X", "sweep"})
    n = _num(b, "lattice", "n", 1, integer=True, positive=True)
    X = _num(b, "lattice", "X", 6.0, positive=True)
    if sweep_mode:
        sw = b.get("sweep", [0.4, 0.2, 0.1, 0.05])
        if not isinstance(sw, list) or len(sw) < 2:
            raise ConfigError("lattice.sweep", "expected a list of at least two spacings")
        for i, h in enumerate(sw):
            if isinstance(h, bool) or not isinstance(h, (int, float)) or not h > 0:
                raise ConfigError(f"lattice.sweep[{i}]", f"spacing must be positive, got {h!r}")
        if any(b2 >= a2 for a2, b2 in zip(sw, sw[1:])):
            raise ConfigError("lattice.sweep", "spacings must be strictly decreasing")
        return LatticeCfg(n, None, None, tuple(float(h) for h in sw), X)
    hbar = _num(b, "lattice", "hbar", positive=True)
    if "R" in b:
        R = _num(b, "lattice", "R", integer=True)
        if R < 0:
            raise ConfigError("lattice.R", f"must be nonnegative, got {R}")
    else:
        R = int(round(X / hbar))
    if (2 * R + 1) ** n > 10**6:
        raise ConfigError("lattice.R", f"{(2 * R + 1) ** n} sites exceed the cap of 1000000")
    return LatticeCfg(n, hbar, R, (), X)


def _parse_potential(b: dict) -> PotentialCfg:
    _unknown(b, "potential", {"kind", "V0", "omega"})
    kind = _kind(b, "potential", ("constant", "harmonic"), "harmonic")
    V0 = _num(b, "potential", "V0", 1.0, positive=True)
    om = _num(b, "potential", "omega", 1.0)
    return PotentialCfg(kind, V0, om)


def _parse_coefficient(b: dict) -> CoefficientCfg:
    kind = _kind(b, "coefficient", ("constant", "linear", "sinusoidal", "kink", "distributional"))
    path = "coefficient"
    if kind == "constant":
        _unknown(b, path, {"kind", "value"})
        return CoefficientCfg(kind, {"value": _num(b, path, "value", 1.0, positive=True)})
    if kind in ("linear", "kink"):
        _unknown(b, path, {"kind", "a0", "slope", "center"})
        a0 = _num(b, path, "a0", 1.0, positive=True)
        sl = _num(b, path, "slope", 1.0)
        p = {"a0": a0, "slope": sl, "center": _num(b, path, "center", 0.5)}
        return CoefficientCfg(kind, p)
    if kind == "sinusoidal":
        _unknown(b, path, {"kind", "mean", "amplitude", "frequency"})
        m = _num(b, path, "mean", 1.5, positive=True)
        amp = _num(b, path, "amplitude", 0.5)
        if abs(amp) >= m:
            raise ConfigError("coefficient.amplitude", "amplitude must be below the mean to keep a positive")
        return CoefficientCfg(kind, {"mean": m, "amplitude": amp, "frequency": _num(b, path, "frequency", 1.0)})
    _unknown(b, path, {"kind", "a0", "atoms", "jumps"})
    a0 = _num(b, path, "a0", 1.0, positive=True)
    atoms, jumps = [], []
    for i, a in enumerate(b.get("atoms", []) or []):
        p = f"coefficient.atoms[{i}]"
        if not isinstance(a, dict):
            raise ConfigError(p, "expected a mapping with t0, weight, order")
        _unknown(a, p, {"t0", "weight", "order"})
        order = _num(a, p, "order", 0, integer=True)
        if order not in (0, 1):
            raise ConfigError(f"{p}.order", f"must be 0 or 1, got {order}")
        atoms.append((_num(a, p, "t0"), _num(a, p, "weight"), order))
    for i, j in enumerate(b.get("jumps", []) or []):
        p = f"coefficient.jumps[{i}]"
        if not isinstance(j, dict):
            raise ConfigError(p, "expected a mapping with t0, height")
        _unknown(j, p, {"t0", "height"})
        jumps.append((_num(j, p, "t0"), _num(j, p, "height")))
    return CoefficientCfg(kind, {"a0": a0}, tuple(atoms), tuple(jumps))


def _parse_source(b: dict) -> SourceCfg:
    _unknown(b, "source", {"kind", "amplitude", "frequency", "width"})
    kind = _kind(b, "source", ("zero", "pulse"), "zero")
    return SourceCfg(kind, _num(b, "source", "amplitude", 1.0), _num(b, "source", "frequency", 1.0),
                     _num(b, "source", "width", 1.0, positive=True))


def _parse_data(b: dict) -> DataCfg:
    _unknown(b, "data", {"kind", "width", "center", "amplitude", "index", "radius"})
    kind = _kind(b, "data", ("gaussian", "eigenmode", "indicator"))
    idx = _num(b, "data", "index", 0, integer=True)
    if idx < 0:
        raise ConfigError("data.index", f"must be nonnegative, got {idx}")
    return DataCfg(kind, _num(b, "data", "width", 1.0, positive=True), _num(b, "data", "center", 0.0),
                   _num(b, "data", "amplitude", 1.0), idx, _num(b, "data", "radius", 1.0, positive=True))


def _parse_epsilon(b: dict) -> EpsilonCfg:
    _unknown(b, "epsilon", {"k_min", "k_max", "L1", "mollifier", "values"})
    k_min = _num(b, "epsilon", "k_min", 1, integer=True, positive=True)
    k_max = _num(b, "epsilon", "k_max", 10, integer=True, positive=True)
    if k_max - k_min < 3:
        raise ConfigError("epsilon.k_max", "schedule needs at least 4 values")
    L1 = _num(b, "epsilon", "L1", 1, integer=True, positive=True)
    moll = b.get("mollifier", "bump")
    if moll not in ("bump", "raised_cosine"):
        raise ConfigError("epsilon.mollifier", f"unknown mollifier {moll!r}")
    vals = b.get("values")
    if vals is not None:
        allowed = {2.0**-k for k in range(k_min, k_max + 1)}
        if not isinstance(vals, list) or not vals:
            raise ConfigError("epsilon.values", "expected a nonempty list")
        for i, v in enumerate(vals):
            if not isinstance(v, (int, float)) or float(v) not in allowed:
                raise ConfigError(f"epsilon.values[{i}]", f"{v!r} is not in the schedule")
        vals = tuple(float(v) for v in vals)
    return EpsilonCfg(k_min, k_max, L1, moll, vals)


def _parse_extra(raw: dict, name: str) -> dict:
    b = _block(raw, name)
    if name == "relax":
        _unknown(b, "relax", {"lambda", "methods", "tolerance"})
        lams = b.get("lambda", [1.0])
        lams = lams if isinstance(lams, list) else [lams]
        for i, v in enumerate(lams):
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
                raise ConfigError(f"relax.lambda[{i}]", f"must be positive, got {v!r}")
        methods = b.get("methods")
        if methods is not None:
            for i, m in enumerate(methods):
                if m not in ("closed_form", "talbot", "l1"):
                    raise ConfigError(f"relax.methods[{i}]", f"unknown method {m!r}")
        return {"lambda": [float(v) for v in lams], "methods": methods,
                "tolerance": _num(b, "relax", "tolerance", 5e-4, positive=True)}
    if name == "verify":
        _unknown(b, "verify", {"draws", "profiles", "slack", "a_min", "a_max"})
        a_min = _num(b, "verify", "a_min", 1.0, positive=True)
        a_max = _num(b, "verify", "a_max", 2.0, positive=True)
        if a_max <= a_min:
            raise ConfigError("verify.a_max", "must exceed verify.a_min")
        return {"draws": _num(b, "verify", "draws", 20, integer=True, positive=True),
                "profiles": _num(b, "verify", "profiles", 10, integer=True, positive=True),
                "slack": _num(b, "verify", "slack", 5e-2, positive=True), "a_min": a_min, "a_max": a_max}
    if name == "uniqueness":
        _unknown(b, "uniqueness", {"amplitude", "power"})
        return {"amplitude": _num(b, "uniqueness", "amplitude", 1.0),
                "power": _num(b, "uniqueness", "power", 3.0)}
    if name == "consistency":
        _unknown(b, "consistency", {"tail_from", "factor"})
        return {"tail_from": _num(b, "consistency", "tail_from", 0.125, positive=True),
                "factor": _num(b, "consistency", "factor", 5.0, positive=True)}
    return {}


def validate_config(raw: Any) -> ExperimentConfig:
    """Turn a parsed mapping into a checked :class:`ExperimentConfig`."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "expected a mapping at the top level")
    for k in raw:
        if k not in KNOWN_BLOCKS:
            raise ConfigError(str(k), "unknown key")
    exp = raw.get("experiment")
    if exp is None:
        raise ConfigError("experiment", "missing")
    if exp not in EXPERIMENTS:
        raise ConfigError("experiment", f"unknown experiment {exp!r}; expected one of {', '.join(EXPERIMENTS)}")
    for blk in REQUIRED[exp]:
        if blk not in raw or raw[blk] is None:
            raise ConfigError(blk, f"block required by the {exp} experiment is missing")
    sweep_mode = exp in ("semiclassical", "veryweak-semiclassical")
    kw: dict = {}
    kw["kernel"] = _parse_kernel(_block(raw, "kernel"))
    if "time" in raw:
        kw["time"] = _parse_time(_block(raw, "time"))
    if "lattice" in raw:
        kw["lattice"] = _parse_lattice(_block(raw, "lattice"), sweep_mode)
    if "potential" in raw:
        kw["potential"] = _parse_potential(_block(raw, "potential"))
    if "coefficient" in raw:
        kw["coefficient"] = _parse_coefficient(_block(raw, "coefficient"))
        needs_dist = exp in ("veryweak", "uniqueness", "veryweak-semiclassical")
        if kw["coefficient"].is_distributional and not needs_dist:
            raise ConfigError("coefficient.kind", f"the {exp} experiment needs a classical coefficient")
    kw["source"] = _parse_source(_block(raw, "source"))
    if "data" in raw:
        kw["data"] = _parse_data(_block(raw, "data"))
        if sweep_mode and kw["data"].kind == "eigenmode":
            raise ConfigError("data.kind", "eigenmode data is not defined across a spacing sweep")
    if "epsilon" in raw:
        kw["epsilon"] = _parse_epsilon(_block(raw, "epsilon"))
    sob = _block(raw, "sobolev")
    _unknown(sob, "sobolev", {"s"})
    s = _num(sob, "sobolev", "s", 0.0)
    if s < 0:
        raise ConfigError("sobolev.s", f"must be nonnegative, got {s}")
    out = _block(raw, "output")
    _unknown(out, "output", {"dir"})
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed", f"expected a nonnegative integer, got {seed!r}")
    extra = _parse_extra(raw, exp)
    if exp == "consistency" and kw.get("coefficient") and kw["coefficient"].is_distributional:
        raise ConfigError("coefficient.kind", "consistency needs a continuous coefficient")
    return ExperimentConfig(exp, raw, s=s, output=str(out.get("dir", "out")), seed=seed, extra=extra, **kw)


def parse_config(path) -> ExperimentConfig:
    """Read and validate a YAML experiment file."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"not valid YAML: {exc}") from exc
    return validate_config(raw)
