import json
import warnings

import pytest

from gradspin.cli import EXIT_CONFIG, EXIT_FAILED, EXIT_IO, EXIT_OK, main


def _config(tmp_path, name="cfg.json", **doc):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


MINIMAL = dict(model="dKMP", N=16, replicas=1, times=[0.01], seed=7)


def test_simulate_minimal(tmp_path):
    out = tmp_path / "out"
    cfg = _config(tmp_path, **MINIMAL, test_functions=["one", "cos1"])
    assert main(["simulate", "--config", cfg, "--out-dir", str(out)]) == EXIT_OK
    lines = (out / "simulate.csv").read_text().splitlines()
    assert lines[0] == "replica,N,t,observable,value"
    observables = [line.split(",")[3] for line in lines[1:]]
    # one row per (replica, t, observable)
    assert len(observables) == len(set(observables))
    assert {"mass", "pair:one", "pair:cos1"} <= set(observables)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["seed"] == 7 and manifest["command"] == "simulate"


def test_simulate_is_byte_identical(tmp_path):
    cfg = _config(tmp_path, **{**MINIMAL, "replicas": 3, "snapshots": True, "martingale": ["cos1"]})
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--config", cfg, "--out-dir", str(a)]) == EXIT_OK
    assert main(["simulate", "--config", cfg, "--out-dir", str(b), "--threads", "2"]) == EXIT_OK
    for name in ("simulate.csv", "snapshots.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert b"\r\n" not in (a / "simulate.csv").read_bytes()


def test_invalid_spin(tmp_path, capsys):
    cfg = _config(tmp_path, **MINIMAL)
    assert main(["simulate", "--config", cfg, "--set", "spin=-1", "--out-dir", str(tmp_path)]) == EXIT_CONFIG
    assert "spin" in capsys.readouterr().err


def test_missing_seed(tmp_path, capsys):
    doc = dict(MINIMAL)
    del doc["seed"]
    assert main(["simulate", "--config", _config(tmp_path, **doc), "--out-dir", str(tmp_path)]) == EXIT_CONFIG
    assert "seed" in capsys.readouterr().err


def test_bad_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert main(["simulate", "--config", str(path)]) == EXIT_CONFIG


def test_hydro_bad_profile(tmp_path, capsys):
    cfg = _config(tmp_path, model="dKMP", N_list=[32], profile="wave:1", seed=1, bins=16)
    assert main(["hydro", "--config", cfg, "--out-dir", str(tmp_path)]) == EXIT_CONFIG
    assert "profile" in capsys.readouterr().err


def test_hydro_single_cell(tmp_path):
    out = tmp_path / "h"
    cfg = _config(tmp_path, model="gKMP", spin=0.5, N_list=[32], times=[0.01], replicas=4, seed=1, bins=16)
    assert main(["hydro", "--config", cfg, "--out-dir", str(out)]) == EXIT_OK
    rows = (out / "hydro_errors.csv").read_text().splitlines()
    assert rows[0] == "N,t,norm,error,se" and len(rows) == 1 + 3
    assert (out / "hydro_profiles.csv").exists()


def test_attract_dkmp(tmp_path):
    out = tmp_path / "a"
    cfg = _config(tmp_path, model="dKMP", seed=0, n_max=15, l_max=30)
    assert main(["attract", "--config", cfg, "--out-dir", str(out)]) == EXIT_OK
    report = json.loads((out / "attract.json").read_text())
    assert report["passed"] and report["violations"] == [] and not report["report_only"]


def test_attract_harm(tmp_path):
    out = tmp_path / "a"
    cfg = _config(tmp_path, model="Harm", spin=1.0, seed=0, n_max=12, l_max=20)
    assert main(["attract", "--config", cfg, "--out-dir", str(out)]) == EXIT_OK
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert main(["attract", "--config", cfg, "--set", "spin=0.3", "--out-dir", str(out)]) == EXIT_OK
    assert json.loads((out / "attract.json").read_text())["report_only"] is True


def test_attract_gkmp_coupling(tmp_path):
    out = tmp_path / "a"
    cfg = _config(tmp_path, model="gKMP", spin=0.5, seed=0, N=16, replicas=3, micro_T=50.0)
    assert main(["attract", "--config", cfg, "--out-dir", str(out)]) == EXIT_OK
    report = json.loads((out / "attract.json").read_text())
    assert report["n_violations"] == 0 and report["runs"] == 3


def test_verify(tmp_path, capsys):
    cfg = _config(tmp_path, seed=0, verify_n_max=10)
    assert main(["verify", "--config", cfg, "--out-dir", str(tmp_path)]) == EXIT_OK
    doc = json.loads((tmp_path / "verify.json").read_text())
    assert doc["passed"]
    assert max(s["worst_residual"] for s in doc["suites"]) <= 1e-8
    assert main(["verify", "--config", cfg, "--set", "corrupt_diffusion=true", "--out-dir", str(tmp_path)]) == EXIT_FAILED
    assert "FAIL  gradient" in capsys.readouterr().out


def test_moments(tmp_path):
    cfg = _config(tmp_path, model="Harm", spin=1.0, rho=1.5, seed=3, draws=20000)
    assert main(["moments", "--config", cfg, "--out-dir", str(tmp_path)]) == EXIT_OK
    lines = (tmp_path / "moments.csv").read_text().splitlines()
    assert lines[0] == "m,kind,closed,sampled,se,z" and len(lines) == 5


def test_io_errors(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfg = _config(tmp_path, **MINIMAL)
    assert main(["simulate", "--config", cfg, "--out-dir", str(blocker / "sub")]) == EXIT_IO
    assert main(["simulate", "--config", str(tmp_path / "missing.json")]) == EXIT_IO
