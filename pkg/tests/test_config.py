import textwrap

import numpy as np
import pytest
import yaml

from latfrac.config import EXPERIMENTS, parse_config, validate_config
from latfrac.errors import ConfigError
from latfrac.kernels import KernelKind

BASE = {
    "experiment": "solve",
    "kernel": {"type": "cd", "alpha": 0.5},
    "time": {"T": 1, "M": 64},
    "lattice": {"n": 1, "hbar": 0.5, "R": 10},
    "potential": {"kind": "harmonic", "V0": 1},
    "coefficient": {"kind": "linear", "a0": 1, "slope": 1},
    "data": {"kind": "gaussian"},
}


def with_(**changes):
    raw = {k: (dict(v) if isinstance(v, dict) else v) for k, v in BASE.items()}
    for path, val in changes.items():
        block, _, key = path.partition("__")
        if key:
            raw.setdefault(block, {})[key] = val
        elif val is None:
            raw.pop(block, None)
        else:
            raw[block] = val
    return raw


def key_of(raw):
    with pytest.raises(ConfigError) as exc:
        validate_config(raw)
    return exc.value.key


def test_minimal_relax(tmp_path):
    p = tmp_path / "r.yaml"
    p.write_text(textwrap.dedent("""\
        experiment: relax
        kernel: {type: cd, alpha: 0.5}
        relax: {lambda: 1}
        time: {T: 1, M: 512}
    """))
    cfg = parse_config(p)
    assert cfg.experiment == "relax" and cfg.kernel.build().kind == KernelKind.CD
    assert cfg.time.grid().size == 513


def test_full_solve_config():
    cfg = validate_config(BASE)
    spec = cfg.lattice.spec()
    assert spec.size == 21
    prof = cfg.coefficient.profile(1.0)
    assert (prof.a0, prof.a1) == (1.0, 2.0)
    assert np.isfinite(cfg.potential.build(spec).evaluate(spec)).all()


@pytest.mark.parametrize("raw,key", [
    (with_(kernel__alpha=1.5), "kernel.alpha"),
    (with_(kernel__alpha=0), "kernel.alpha"),
    (with_(lattice__hbar=-0.1), "lattice.hbar"),
    (with_(potential__V0=0), "potential.V0"),
    (with_(coefficient__a0=0), "coefficient.a0"),
    (with_(experiment="relaxx"), "experiment"),
    (with_(data=None), "data"),
    (with_(bogus={}), "bogus"),
    (with_(seed=-3), "seed"),
    (with_(time__M=0), "time.M"),
])
def test_errors_name_key(raw, key):
    assert key_of(raw) == key


def test_veryweak_needs_epsilon():
    raw = with_(experiment="veryweak", coefficient={"kind": "distributional", "a0": 1,
                                                    "atoms": [{"t0": 0.5, "weight": 1}]})
    assert key_of(raw) == "epsilon"
    raw["epsilon"] = {"k_min": 1, "k_max": 10}
    cfg = validate_config(raw)
    assert len(cfg.epsilon.schedule().eps) == 10


def test_distributional_rejected_for_classical():
    raw = with_(coefficient={"kind": "distributional", "a0": 1, "atoms": [{"t0": 0.5, "weight": 1}]})
    assert key_of(raw) == "coefficient.kind"


def test_not_a_mapping():
    assert key_of([1, 2]) == "<root>"


def test_bad_yaml(tmp_path):
    p = tmp_path / "x.yaml"
    p.write_text("experiment: [unclosed\n")
    with pytest.raises(ConfigError):
        parse_config(p)


def test_every_experiment_named():
    assert set(EXPERIMENTS) == {"relax", "solve", "verify", "veryweak", "uniqueness", "consistency",
                                "semiclassical", "veryweak-semiclassical", "admissibility"}


def test_yaml_roundtrip_of_base(tmp_path):
    p = tmp_path / "s.yaml"
    p.write_text(yaml.safe_dump(BASE))
    assert parse_config(p).raw == BASE
