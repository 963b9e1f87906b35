import csv
import hashlib
import json
import subprocess
import sys
from dataclasses import replace

import pytest

from burgers_vlasov.cli import EXIT_ERROR, EXIT_FAIL, EXIT_OK, main
from burgers_vlasov.diagnostics import SCHEMA
from burgers_vlasov.scenarios import parse_config_text, preset


@pytest.fixture
def small_config(tmp_path):
    cfg = preset("coupled_bump")
    cfg = replace(cfg.with_grid(nx=32, nv=32, t_end=0.4), snapshot_every=0.02, name="small")
    path = tmp_path / "small.ini"
    path.write_text(cfg.to_ini())
    return path


def test_run_writes_outputs(tmp_path, small_config, capsys):
    out = tmp_path / "out"
    code = main(["run", str(small_config), "--out", str(out)])
    assert code in (EXIT_OK, EXIT_FAIL)
    names = {p.name for p in out.iterdir()}
    assert names == {"fluid.csv", "kinetic.csv", "diagnostics.json", "timeseries.csv", "manifest.json"}
    report = json.loads((out / "diagnostics.json").read_text())
    assert report["schema"] == SCHEMA
    assert (code == EXIT_OK) == report["passed"]
    with open(out / "fluid.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert set(rows[0]) == {"t", "x", "u"} and len(rows) % 32 == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "run"
    assert parse_config_text(small_config.read_text()).to_dict() == manifest["config"]
    for entry in manifest["files"]:
        data = (out / entry["path"]).read_bytes()
        assert entry["bytes"] == len(data)
        assert entry["sha256"] == hashlib.sha256(data).hexdigest()
    assert "PASS mass" in capsys.readouterr().out


def test_reruns_are_byte_identical(tmp_path, small_config):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        main(["run", str(small_config), "--out", str(out), "--kinetic-stride", "5"])
    for name in ("fluid.csv", "kinetic.csv", "diagnostics.json", "timeseries.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    ma = json.loads((a / "manifest.json").read_text())
    mb = json.loads((b / "manifest.json").read_text())
    ma.pop("timing")
    mb.pop("timing")
    assert ma == mb


def test_no_kinetic_csv(tmp_path, small_config):
    out = tmp_path / "o"
    main(["run", str(small_config), "--out", str(out), "--no-kinetic-csv", "--no-reference"])
    assert not (out / "kinetic.csv").exists()


def test_configuration_errors_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text(preset("zero_data").to_ini().replace("epsilon = 0.02", "epsilon = 0.0"))
    assert main(["run", str(bad), "--out", str(tmp_path / "x")]) == EXIT_ERROR
    assert "epsilon" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.ini")]) == EXIT_ERROR
    assert main(["run", "zero_data", "--kinetic-stride", "0"]) == EXIT_ERROR


def test_verify_rejects_discontinuous_data(tmp_path):
    assert main(["verify", "riemann_pure_fluid", "--out", str(tmp_path)]) == EXIT_ERROR


def test_verify_short_time_passes(tmp_path):
    assert main(["verify", "smooth_short_time", "--out", str(tmp_path)]) == EXIT_OK
    report = json.loads((tmp_path / "verify.json").read_text())
    verdicts = {r["name"]: r["verdict"] for r in report["records"]}
    assert verdicts["picard_contraction"] == "pass"
    assert verdicts["picard_vs_driver_l1"] == "pass"
    assert verdicts["vlasov_oracle_mass"] == "pass"


def test_verify_zero_data(tmp_path):
    assert main(["verify", "zero_data", "--out", str(tmp_path)]) == EXIT_OK


def test_verify_long_time_exits_2(tmp_path, capsys):
    assert main(["verify", "smooth_long_time", "--out", str(tmp_path)]) == EXIT_FAIL
    assert "no contraction" in capsys.readouterr().err
    report = json.loads((tmp_path / "verify.json").read_text())
    assert report["records"][0]["verdict"] == "fail"


def test_sweep(tmp_path, monkeypatch):
    monkeypatch.setenv("BURGERS_VLASOV_WORKERS", "2")
    cfg = preset("riemann_particles").with_grid(t_end=0.3)
    path = tmp_path / "rp.ini"
    path.write_text(cfg.to_ini())
    code = main(["sweep", str(path), "--eps", "0.04,0.02", "--out", str(tmp_path / "s")])
    data = json.loads((tmp_path / "s" / "convergence.json").read_text())
    assert (code == EXIT_OK) == (data["verdict"] == "consistent-with-convergence")
    assert data["nx"] == [100, 141] and "dissipation_band" in data
    lines = (tmp_path / "s" / "distances.csv").read_text().splitlines()
    assert lines[0] == "eps_coarse,eps_fine,u_l1,rho_l1" and len(lines) == 2


def test_sweep_bad_inputs(tmp_path, monkeypatch):
    assert main(["sweep", "riemann_particles", "--eps", "0.02,0.04", "--out", str(tmp_path)]) == EXIT_ERROR
    assert main(["sweep", "riemann_particles", "--eps", "a,b", "--out", str(tmp_path)]) == EXIT_ERROR
    monkeypatch.setenv("BURGERS_VLASOV_WORKERS", "zero")
    assert main(["sweep", "riemann_particles", "--eps", "0.04,0.02", "--out", str(tmp_path)]) == EXIT_ERROR


def test_presets(capsys):
    assert main(["presets"]) == EXIT_OK
    assert "coupled_bump" in capsys.readouterr().out
    assert main(["presets", "zero_data"]) == EXIT_OK
    assert parse_config_text(capsys.readouterr().out) == preset("zero_data")


def test_console_script_module():
    proc = subprocess.run([sys.executable, "-m", "burgers_vlasov.cli", "presets"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and "zero_data" in proc.stdout
