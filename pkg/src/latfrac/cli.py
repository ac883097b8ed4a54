"""Command line entry point: ``latfrac run | validate | compare``.

Exit codes: 0 all asserted invariants passed, 1 an invariant failed,
2 numerical or argument error inside the library, 3 file-system error,
4 invalid configuration.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import os
import platform
import sys
import time
import traceback
from pathlib import Path

import mpmath
import numpy as np
import scipy

from . import __version__
from .config import ExperimentConfig, parse_config
from .errors import ConfigError, LatfracError
from .kernels import PROBE_GRID, check_admissibility
from .l1 import is_uniform
from .lattice import assemble_hamiltonian, truncation_mass
from .relaxation import Method, complete_monotonicity_probe, relaxation_curve
from .semiclassical import (HbarSweep, gaussian_benchmark, hamiltonian_defect, semiclassical_sweep,
                            veryweak_semiclassical_sweep)
from .solver import solve_full, verify_wellposedness
from .spectral import eigendecompose
from .suites import sign_comparison_suite, wellposedness_suite
from .veryweak import (consistency_experiment, moderateness_fit, resolve_grid, uniqueness_experiment,
                       veryweak_solve)

EXIT_OK, EXIT_FAILED, EXIT_NUMERIC, EXIT_IO, EXIT_CONFIG = 0, 1, 2, 3, 4


# --- output ---------------------------------------------------------------------

def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(_cell(v) for v in r) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def compare_csv(a: Path, b: Path, lenient: bool = False, rtol: float = 1e-12) -> bool:
    """Byte equality of two CSV files, or cellwise ``rtol`` agreement when lenient."""
    ta, tb = Path(a).read_bytes(), Path(b).read_bytes()
    if ta == tb:
        return True
    if not lenient:
        return False
    la, lb = ta.decode().splitlines(), tb.decode().splitlines()
    if len(la) != len(lb) or la[:1] != lb[:1]:
        return False
    for ra, rb in zip(la[1:], lb[1:]):
        ca, cb = ra.split(","), rb.split(",")
        if len(ca) != len(cb):
            return False
        for x, y in zip(ca, cb):
            if x == y:
                continue
            try:
                fx, fy = float(x), float(y)
            except ValueError:
                return False
            if not abs(fx - fy) <= rtol * max(abs(fx), abs(fy)):
                return False
    return True


# --- experiments --------------------------------------------------------------
# each returns (passed, summary, {filename: (header, rows)})

def _lattice(cfg: ExperimentConfig):
    spec = cfg.lattice.spec()
    H = assemble_hamiltonian(spec, cfg.potential.build(spec))
    return spec, eigendecompose(H)


def run_relax(cfg: ExperimentConfig, threads: int):
    kernel = cfg.kernel.build()
    t = cfg.time.grid()
    methods = cfg.extra["methods"] or (["closed_form", "talbot", "l1"] if kernel.kind.value == "cd" else ["talbot", "l1"])
    rows = []
    summary = {"curves": [], "agreement": [], "tolerance": cfg.extra["tolerance"]}
    ok = True
    for lam in cfg.extra["lambda"]:
        per = {}
        for m in methods:
            c = relaxation_curve(kernel, lam, t, Method(m))
            per[m] = c.w
            inv = c.invariants()
            entry = {"lambda": lam, "method": m, **inv}
            if is_uniform(t):
                cm = complete_monotonicity_probe(c, t=t)
                entry.update(cm_passed=cm.passed, cm_worst=cm.worst)
                ok &= cm.passed
            ok &= all(inv.values())
            summary["curves"].append(entry)
            rows += [(lam, m, tm, wm) for tm, wm in zip(t, c.w)]
        for i, a in enumerate(methods):
            for b in methods[i + 1:]:
                d = float(np.max(np.abs(per[a] - per[b])))
                summary["agreement"].append({"lambda": lam, "pair": f"{a}-{b}", "max_diff": d})
                ok &= d <= cfg.extra["tolerance"]
    return ok, summary, {"relaxation.csv": (("lambda", "method", "t", "w"), rows)}


def run_solve(cfg: ExperimentConfig, threads: int):
    spec, dec = _lattice(cfg)
    kernel = cfg.kernel.build()
    t = cfg.time.grid()
    u0 = cfg.data.sample(spec, dec)
    prof = cfg.coefficient.profile(cfg.time.T)
    src = cfg.source.build()
    fld = solve_full(kernel, dec, prof, u0, src, t, threads=threads)
    hn, cn = fld.h_norms(2 + cfg.s), fld.caputo_norms(cfg.s)
    rep = verify_wellposedness(fld, prof, u0, src, cfg.s, dec.lambda_min)
    finite = bool(np.all(np.isfinite(hn)) and np.all(np.isfinite(cn)))
    summary = {"sites": spec.size, "lambda_min": dec.lambda_min, "max_h_norm": float(hn.max()),
               "max_caputo_norm": float(cn.max()), "wellposedness_max_ratio": rep.max_ratio,
               "wellposedness_passed": rep.passed, "finite": finite,
               "initial_truncation_mass": truncation_mass(spec, u0)}
    modes = np.asarray(fld.modes, dtype=complex)
    sol = [(tm, xi, modes[m, xi].real, modes[m, xi].imag) for m, tm in enumerate(t) for xi in range(dec.size)]
    files = {"norms.csv": (("t", "h2s_norm", "ds_norm", "ratio"), list(zip(t, hn, cn, rep.ratio))),
             "solution.csv": (("t", "xi", "re", "im"), sol)}
    return rep.passed and finite, summary, files


def run_verify(cfg: ExperimentConfig, threads: int):
    spec, dec = _lattice(cfg)
    kernel = cfg.kernel.build()
    t = cfg.time.grid()
    ex = cfg.extra
    rng = np.random.default_rng(cfg.seed)
    wp = wellposedness_suite(kernel, dec, t, cfg.time.T, ex["draws"], rng, cfg.s, ex["a_min"], ex["a_max"],
                             ex["slack"], threads)
    lams = (dec.eigenvalues[0], dec.eigenvalues[dec.size // 2], dec.eigenvalues[-1])
    sc = sign_comparison_suite(kernel, lams, t, cfg.time.T, ex["profiles"], rng, ex["a_min"], ex["a_max"])
    ok_wp, ok_sc = all(r.passed for r in wp), all(r.passed for r in sc)
    summary = {"wellposedness": {"draws": len(wp), "max_ratio": max(r.max_ratio for r in wp), "passed": ok_wp},
               "sign_comparison": {"checks": len(sc), "min_value": min(r.min_value for r in sc),
                                   "max_floor_excess": max(r.floor_excess for r in sc), "passed": ok_sc}}
    files = {
        "wellposedness.csv": (("draw", "max_ratio", "passed"), [(r.draw, r.max_ratio, r.passed) for r in wp]),
        "signcomparison.csv": (("draw", "lambda", "min_value", "floor_excess", "passed"),
                               [(r.draw, r.lam, r.min_value, r.floor_excess, r.passed) for r in sc]),
    }
    return ok_wp and ok_sc, summary, files


def _fit_dict(fit):
    return {"N": fit.N, "slope": fit.slope, "r2": fit.r2, "flags": fit.flags}


def run_veryweak(cfg: ExperimentConfig, threads: int):
    spec, dec = _lattice(cfg)
    kernel = cfg.kernel.build()
    T = cfg.time.T
    coeff = cfg.coefficient.distribution(T)
    sched = cfg.epsilon.schedule()
    u0 = cfg.data.sample(spec, dec)
    fam = veryweak_solve(kernel, dec, coeff, cfg.source.build(), u0, sched, cfg.time.grid(), cfg.s,
                         cfg.epsilon.build_mollifier(), threads)
    inc = fam.increments(cfg.s)
    nonneg = all(a.weight >= 0 and a.order == 0 for a in coeff.atoms) and all(j.height >= 0 for j in coeff.jumps)
    floor_ok = True
    if nonneg:
        t = fam.members[0].field.t
        floor_ok = all(float(np.min(coeff.mollified(m.omega, cfg.epsilon.build_mollifier())(t))) >= coeff.a0 - 1e-12
                       for m in fam.members)
    fa, fs = moderateness_fit(fam.eps, fam.sup_a), moderateness_fit(fam.eps, fam.sol_norms)
    summary = {"sup_a_fit": _fit_dict(fa), "solution_fit": _fit_dict(fs), "floor_preserved": floor_ok,
               "resolution_warnings": fam.warnings}
    rows = [(m.eps, m.omega, m.sup_a, m.sol_norm, d) for m, d in zip(fam.members, inc)]
    return floor_ok, summary, {"sweep.csv": (("eps", "omega", "sup_a", "sol_norm", "diff_norm"), rows)}


def run_uniqueness(cfg: ExperimentConfig, threads: int):
    spec, dec = _lattice(cfg)
    kernel = cfg.kernel.build()
    T = cfg.time.T
    coeff = cfg.coefficient.distribution(T)
    sched = cfg.epsilon.schedule()
    moll = cfg.epsilon.build_mollifier()
    amp, pw = cfg.extra["amplitude"], cfg.extra["power"]
    t, notes = resolve_grid(cfg.time.grid(), coeff, sched.eps, sched)

    def fam_a(e):
        return coeff.mollified(sched.omega(e), moll)

    def fam_b(e):
        base = fam_a(e)
        return lambda tt: base(tt) + amp * e**pw

    rep = uniqueness_experiment(kernel, dec, fam_a, fam_b, cfg.source.build(), cfg.data.sample(spec, dec),
                                sched, t, T, cfg.s, threads=threads)
    summary = {"coefficient_slope": rep.coef_negligibility.slope,
               "coefficient_negligible": {str(q): v for q, v in rep.coef_negligibility.passed.items()},
               "solution_slope": rep.sol_slope, "passed": rep.passed, "resolution_warnings": notes}
    rows = list(zip(rep.eps, rep.coef_diffs, rep.sol_diffs))
    return rep.passed, summary, {"uniqueness.csv": (("eps", "coef_diff", "sol_diff"), rows)}


def run_consistency(cfg: ExperimentConfig, threads: int):
    spec, dec = _lattice(cfg)
    kernel = cfg.kernel.build()
    sched = cfg.epsilon.schedule()
    rep = consistency_experiment(kernel, dec, cfg.coefficient.function(), cfg.source.build(),
                                 cfg.data.sample(spec, dec), sched, cfg.time.grid(), cfg.time.T, cfg.s,
                                 cfg.extra["tail_from"], cfg.extra["factor"],
                                 mollifier=cfg.epsilon.build_mollifier(), threads=threads)
    summary = {"exact": rep.exact, "monotone_tail": rep.monotone_tail, "reduction": rep.reduction,
               "passed": rep.passed, "max_error": float(rep.errors.max())}
    rows = [(e, sched.omega(e), err) for e, err in zip(rep.eps, rep.errors)]
    return rep.passed, summary, {"consistency.csv": (("eps", "omega", "error"), rows)}


def _sweep(cfg: ExperimentConfig, profile) -> HbarSweep:
    lat = cfg.lattice
    return HbarSweep(cfg.kernel.build(), profile, cfg.potential.function(), cfg.potential.V0,
                     cfg.data.function(), cfg.time.grid(), lat.sweep, lat.X, lat.n, cfg.source.site_fn())


def _nonincreasing(e, slack=0.05) -> bool:
    return bool(np.all(e[1:] <= e[:-1] * (1 + slack)))


CONV_HEADER = ("hbar", "e_total", "e_field", "e_caputo", "observed_order")


def run_semiclassical(cfg: ExperimentConfig, threads: int):
    sweep = _sweep(cfg, cfg.coefficient.profile(cfg.time.T))
    tab = semiclassical_sweep(sweep, cfg.s, threads=threads)
    bench = gaussian_benchmark(cfg.lattice.n)
    defects = [hamiltonian_defect(sweep.spec_for(h), bench) for h in sweep.hbars]
    ok_def = all(d.passed for d in defects)
    ok_mono = _nonincreasing(tab.e_total)
    summary = {"errors": list(tab.e_total), "orders": list(tab.order), "nonincreasing": ok_mono,
               "defect_bound_holds": ok_def,
               "defect_ratios": [a.defect / b.defect for a, b in zip(defects[:-1], defects[1:])]}
    files = {
        "convergence.csv": (CONV_HEADER, list(tab.rows())),
        "defect.csv": (("hbar", "defect", "bound", "passed"), [(d.hbar, d.defect, d.bound, d.passed) for d in defects]),
    }
    return ok_def and ok_mono, summary, files


def run_veryweak_semiclassical(cfg: ExperimentConfig, threads: int):
    T = cfg.time.T
    coeff = cfg.coefficient.distribution(T)
    sched = cfg.epsilon.schedule()
    sweep = _sweep(cfg, None)
    tabs = veryweak_semiclassical_sweep(sweep, coeff, sched, cfg.s, cfg.epsilon.values,
                                        cfg.epsilon.build_mollifier(), threads=threads)
    rows, per, ok = [], [], True
    for e, tab in tabs.items():
        mono = _nonincreasing(tab.e_total)
        ok &= mono
        per.append({"eps": e, "nonincreasing": mono, "errors": list(tab.e_total), "flags": tab.flags})
        rows += [(e, *r) for r in tab.rows()]
    return ok, {"per_eps": per}, {"convergence.csv": (("eps",) + CONV_HEADER, rows)}


def run_admissibility(cfg: ExperimentConfig, threads: int):
    kernel = cfg.kernel.build()
    rep = check_admissibility(kernel)
    t = PROBE_GRID
    rows = list(zip(t, kernel.density(t), kernel.cumulative(t), np.real(kernel.symbol(t))))
    return rep.passed, rep.as_dict(), {"admissibility.csv": (("t", "density", "cumulative", "symbol"), rows)}


RUNNERS = {
    "relax": run_relax,
    "solve": run_solve,
    "verify": run_verify,
    "veryweak": run_veryweak,
    "uniqueness": run_uniqueness,
    "consistency": run_consistency,
    "semiclassical": run_semiclassical,
    "veryweak-semiclassical": run_veryweak_semiclassical,
    "admissibility": run_admissibility,
}


# --- driver -------------------------------------------------------------------

def _origin(exc: BaseException) -> str:
    """Module of the innermost library frame that raised ``exc``."""
    mod = "latfrac"
    for fr in traceback.extract_tb(exc.__traceback__):
        p = Path(fr.filename)
        if p.parent.name == "latfrac" and p.stem not in ("errors", "cli"):
            mod = f"latfrac.{p.stem}"
    return mod


def _threads(arg: int | None) -> int:
    if arg is not None:
        if arg < 1:
            raise ConfigError("--threads", f"must be at least 1, got {arg}")
        return arg
    env = os.environ.get("LATFRAC_THREADS")
    if env is None or env == "":
        return 1
    try:
        n = int(env)
    except ValueError:
        raise ConfigError("LATFRAC_THREADS", f"expected an integer, got {env!r}") from None
    if n < 1:
        raise ConfigError("LATFRAC_THREADS", f"must be at least 1, got {n}")
    return n


def _versions() -> dict:
    return {"latfrac": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "mpmath": mpmath.__version__}


def run(config_path, out: str | None = None, threads: int | None = None, lenient: bool = False) -> int:
    """Run one experiment; returns the process exit code."""
    try:
        cfg = parse_config(config_path)
        nthreads = _threads(threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    outdir = Path(out if out is not None else cfg.output)
    manifest = {"experiment": cfg.experiment, "config": cfg.raw, "config_path": str(config_path),
                "versions": _versions(), "threads": nthreads, "lenient": lenient, "seed": cfg.seed,
                "started": _dt.datetime.now(_dt.timezone.utc).isoformat(), "status": "running"}
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        write_json(outdir / "manifest.json", manifest)
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    t0 = time.perf_counter()
    try:
        passed, summary, files = RUNNERS[cfg.experiment](cfg, nthreads)
        code = EXIT_OK if passed else EXIT_FAILED
        for name, (header, rows) in files.items():
            write_csv(outdir / name, header, rows)
        write_json(outdir / "summary.json", {"experiment": cfg.experiment, "passed": passed, **summary})
        manifest["status"] = "passed" if passed else "failed"
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        code, manifest["status"], manifest["error"] = EXIT_CONFIG, "error", str(exc)
    except LatfracError as exc:
        msg = f"{_origin(exc)}: {exc}"
        print(f"error: {msg}", file=sys.stderr)
        code, manifest["status"], manifest["error"] = EXIT_NUMERIC, "error", msg
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        code, manifest["status"], manifest["error"] = EXIT_IO, "error", str(exc)
    manifest["wall_time_s"] = time.perf_counter() - t0
    manifest["exit_code"] = code
    try:
        write_json(outdir / "manifest.json", manifest)
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"{cfg.experiment}: {manifest['status']} -> {outdir}")
    return code


def validate(config_path) -> int:
    try:
        cfg = parse_config(config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"ok: {cfg.experiment}")
    return EXIT_OK


def compare(dir_a, dir_b, lenient: bool = False) -> int:
    """Compare the CSV bodies of two output directories."""
    a, b = Path(dir_a), Path(dir_b)
    try:
        names = sorted(p.name for p in a.glob("*.csv"))
        if names != sorted(p.name for p in b.glob("*.csv")):
            print("csv file sets differ", file=sys.stderr)
            return EXIT_FAILED
        bad = [n for n in names if not compare_csv(a / n, b / n, lenient)]
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    for n in bad:
        print(f"differs: {n}", file=sys.stderr)
    return EXIT_FAILED if bad else EXIT_OK


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="latfrac", description="Lattice time-fractional diffusion experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the experiment described by a YAML config")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (overrides output.dir)")
    r.add_argument("--threads", type=int, help="worker threads (default: $LATFRAC_THREADS or 1)")
    r.add_argument("--lenient", action="store_true",
                   help="record that reproducibility is judged at 1e-12 relative rather than byte equality")
    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("config")
    c = sub.add_parser("compare", help="compare CSV bodies of two output directories")
    c.add_argument("dir_a")
    c.add_argument("dir_b")
    c.add_argument("--lenient", action="store_true", help="accept 1e-12 relative differences")
    args = ap.parse_args(argv)
    if args.command == "run":
        return run(args.config, args.out, args.threads, args.lenient)
    if args.command == "validate":
        return validate(args.config)
    return compare(args.dir_a, args.dir_b, args.lenient)


if __name__ == "__main__":
    sys.exit(main())
