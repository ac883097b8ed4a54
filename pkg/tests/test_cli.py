import json
import subprocess
import sys

import pytest
import yaml

from latfrac import cli

RELAX = {"experiment": "relax", "kernel": {"type": "cd", "alpha": 0.5}, "relax": {"lambda": [1, 10]},
         "time": {"T": 1, "M": 512, "grading": 3}}
LATTICE = {"lattice": {"n": 1, "hbar": 0.5, "R": 10}, "potential": {"kind": "harmonic", "V0": 1},
           "kernel": {"type": "cd", "alpha": 0.5}, "time": {"T": 1, "M": 128}}
VERIFY = {"experiment": "verify", **LATTICE, "coefficient": {"kind": "linear", "a0": 1, "slope": 1},
          "source": {"kind": "pulse", "amplitude": 1, "frequency": 1}, "data": {"kind": "gaussian"},
          "verify": {"draws": 3, "profiles": 2}, "seed": 7}
SEMI = {"experiment": "semiclassical", "kernel": {"type": "cd", "alpha": 0.5}, "time": {"T": 1, "M": 128},
        "lattice": {"n": 1, "X": 6}, "potential": {"kind": "harmonic", "V0": 1},
        "coefficient": {"kind": "linear", "a0": 1, "slope": 1}, "data": {"kind": "gaussian"}}


def cfg_file(tmp_path, raw, name="c.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(raw))
    return p


def test_relax_outputs(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["run", str(cfg_file(tmp_path, RELAX)), "--out", str(out)]) == 0
    assert {p.name for p in out.iterdir()} >= {"relaxation.csv", "summary.json", "manifest.json"}
    lines = (out / "relaxation.csv").read_text().splitlines()
    assert lines[0] == "lambda,method,t,w"
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "passed" and man["exit_code"] == 0 and man["wall_time_s"] >= 0


def test_csv_format(tmp_path):
    out = tmp_path / "o"
    cli.main(["run", str(cfg_file(tmp_path, RELAX)), "--out", str(out)])
    raw = (out / "relaxation.csv").read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    row = raw.decode().splitlines()[5].split(",")
    assert float(row[3]) == float(repr(float(row[3])))


def test_verify_deterministic(tmp_path):
    p = cfg_file(tmp_path, VERIFY)
    assert cli.main(["run", str(p), "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["run", str(p), "--out", str(tmp_path / "b"), "--threads", "3"]) == 0
    assert (tmp_path / "a" / "summary.json").read_bytes() == (tmp_path / "b" / "summary.json").read_bytes()
    assert cli.compare(tmp_path / "a", tmp_path / "b") == 0


def test_semiclassical_rows(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["run", str(cfg_file(tmp_path, SEMI)), "--out", str(out)]) == 0
    lines = (out / "convergence.csv").read_text().splitlines()
    assert lines[0] == "hbar,e_total,e_field,e_caputo,observed_order" and len(lines) == 5


def test_exit_invariant_failure(tmp_path):
    # uniform grid: L1 misses the 5e-4 agreement band near t = 0
    raw = dict(RELAX, time={"T": 1, "M": 64})
    assert cli.main(["run", str(cfg_file(tmp_path, raw)), "--out", str(tmp_path / "o")]) == 1


def test_exit_numeric(tmp_path, capsys):
    raw = {"experiment": "veryweak", **LATTICE, "data": {"kind": "gaussian"}, "epsilon": {"k_min": 3, "k_max": 6},
           "coefficient": {"kind": "distributional", "a0": 1, "atoms": [{"t0": 0.5, "weight": 5, "order": 1}]}}
    out = tmp_path / "o"
    assert cli.main(["run", str(cfg_file(tmp_path, raw)), "--out", str(out)]) == 2
    assert "latfrac.veryweak" in capsys.readouterr().err
    assert json.loads((out / "manifest.json").read_text())["exit_code"] == 2


def test_exit_io(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["run", str(cfg_file(tmp_path, RELAX)), "--out", str(blocker / "sub")]) == 3
    assert cli.main(["run", str(tmp_path / "missing.yaml")]) == 3
    assert cli.main(["validate", str(tmp_path / "missing.yaml")]) == 3


def test_exit_config(tmp_path, capsys):
    raw = dict(RELAX, kernel={"type": "cd", "alpha": 1.5})
    assert cli.main(["run", str(cfg_file(tmp_path, raw))]) == 4
    assert "kernel.alpha" in capsys.readouterr().err
    assert cli.main(["validate", str(cfg_file(tmp_path, raw))]) == 4
    assert cli.main(["validate", str(cfg_file(tmp_path, RELAX, "ok.yaml"))]) == 0
    assert cli.main(["run", str(cfg_file(tmp_path, RELAX, "ok.yaml")), "--threads", "0"]) == 4


def test_manifest_written_before_compute(tmp_path, monkeypatch):
    out = tmp_path / "o"
    seen = {}

    def spy(cfg, threads):
        seen.update(json.loads((out / "manifest.json").read_text()))
        return True, {}, {}

    monkeypatch.setitem(cli.RUNNERS, "relax", spy)
    assert cli.run(cfg_file(tmp_path, RELAX), str(out)) == 0
    assert seen["status"] == "running" and "wall_time_s" not in seen


def test_env_threads(tmp_path, monkeypatch):
    out = tmp_path / "o"
    monkeypatch.setenv("LATFRAC_THREADS", "2")
    cli.main(["run", str(cfg_file(tmp_path, RELAX)), "--out", str(out)])
    assert json.loads((out / "manifest.json").read_text())["threads"] == 2
    monkeypatch.setenv("LATFRAC_THREADS", "many")
    assert cli.main(["run", str(cfg_file(tmp_path, RELAX)), "--out", str(out)]) == 4


def test_compare_lenient(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    (a / "x.csv").write_text("t,w\n0,1.0000000000000000\n")
    (b / "x.csv").write_text("t,w\n0,1.0000000000000002\n")
    assert cli.compare(a, b) == 1
    assert cli.compare(a, b, lenient=True) == 0
    (b / "x.csv").write_text("t,w\n0,1.000001\n")
    assert cli.compare(a, b, lenient=True) == 1
    (b / "y.csv").write_text("t\n")
    assert cli.compare(a, b, lenient=True) == 1


@pytest.mark.parametrize("raw", [
    {"experiment": "admissibility", "kernel": {"type": "ab", "alpha": 0.5}},
    {"experiment": "solve", **LATTICE, "coefficient": {"kind": "sinusoidal", "mean": 1.5, "amplitude": 0.5,
                                                       "frequency": 3},
     "data": {"kind": "eigenmode", "index": 2}},
])
def test_other_experiments_pass(tmp_path, raw):
    assert cli.main(["run", str(cfg_file(tmp_path, raw)), "--out", str(tmp_path / "o")]) == 0


def test_console_entry(tmp_path):
    r = subprocess.run([sys.executable, "-m", "latfrac.cli", "validate", str(cfg_file(tmp_path, RELAX))],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "ok: relax" in r.stdout
