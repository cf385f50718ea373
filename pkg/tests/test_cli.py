import json
import shutil
import subprocess

import pytest

from lorot.cli import main

BASE_SPACE = {
    "bounds": [[0.0, 5.0], [0.0, 1.0]],
    "resolution": [40, 8],
    "weight": {"kind": "zero", "coeffs": []},
}

TCD_CHECK = {
    "name": "flat_tcd",
    "kind": "tcd",
    "mu0": "mu0",
    "mu1": "mu1",
    "variant": "TCD_reduced",
    "K": 0.0,
    "N": 2.0,
    "p": 0.5,
    "Nprime_grid": [2.0, 3.0],
    "t_grid": [0.0, 0.5, 1.0],
    "tolerance": 0.05,
}


def write_config(tmp_path, checks, name="config.json", **extra):
    doc = {
        "schema": 1,
        "seed": 0,
        "space": BASE_SPACE,
        "measures": {
            "mu0": {"box": [[0.0, 1.0], [0.0, 1.0]]},
            "mu1": {"box": [[4.0, 5.0], [0.0, 1.0]]},
        },
        "checks": checks,
        "output_dir": str(tmp_path),
    }
    doc.update(extra)
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def test_coeffs_subcommand(capsys):
    code = main(["coeffs", "--K", "-2", "--N", "2", "--t", "0.5",
                 "--theta", "2", "--family", "tau"])
    assert code == 0
    assert float(capsys.readouterr().out.strip()) == pytest.approx(
        0.33878390276303916, abs=1e-15)
    main(["coeffs", "--K", "40", "--N", "1", "--t", "0.5", "--theta", "1",
          "--family", "sigma"])
    assert capsys.readouterr().out.strip() == "inf"


def test_usage_errors(capsys):
    assert main(["not-a-command"]) == 1
    assert main([]) == 1
    assert main(["coeffs", "--K", "oops", "--N", "2", "--t", "0.5",
                 "--theta", "1"]) == 1


def test_malformed_json(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{ this is not json")
    assert main(["run", str(bad)]) == 1
    err = capsys.readouterr().err
    assert "config error" in err and "line" in err


def test_missing_field_reports_path(tmp_path, capsys):
    path = tmp_path / "nospacetime.json"
    path.write_text(json.dumps({"schema": 1, "checks": []}))
    assert main(["run", str(path)]) == 1
    assert "space" in capsys.readouterr().err


def test_run_writes_artifacts(tmp_path, capsys):
    check = dict(TCD_CHECK, report="tcd_report.json", csv="tcd.csv")
    cfg = write_config(tmp_path, [check], summary="summary.json")
    assert main(["run", cfg]) == 0
    out = capsys.readouterr().out
    assert "flat_tcd: PASS worst_margin=" in out
    report = json.loads((tmp_path / "tcd_report.json").read_text())
    assert report["pass"] is True
    assert report["spec"]["check"] == "tcd"
    csv_lines = (tmp_path / "tcd.csv").read_text().strip().splitlines()
    assert csv_lines[0] == "t,Nprime,lhs,rhs,margin"
    assert len(csv_lines) == 1 + 3 * 2  # |t_grid| x |Nprime_grid|
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["schema"] == 1 and summary["seed"] == 0
    assert summary["checks"][0]["name"] == "flat_tcd"
    assert summary["checks"][0]["pass"] is True


def test_run_deterministic(tmp_path, capsys):
    check = dict(TCD_CHECK, report="r.json")
    cfg = write_config(tmp_path, [check], summary="s.json")
    assert main(["run", cfg]) == 0
    first = (tmp_path / "r.json").read_bytes(), (tmp_path / "s.json").read_bytes()
    assert main(["run", cfg]) == 0
    second = (tmp_path / "r.json").read_bytes(), (tmp_path / "s.json").read_bytes()
    assert first == second
    capsys.readouterr()


def test_failing_check_exits_2(tmp_path, capsys):
    check = {
        "name": "bm_flat",
        "kind": "bonnet_myers",
        "K": 1.0,
        "N": 2.0,
        "tolerance": 0.01,
    }
    cfg = write_config(tmp_path, [check])
    assert main(["run", cfg]) == 2
    assert "bm_flat: FAIL" in capsys.readouterr().out


def test_kind_aliases_filter(tmp_path, capsys):
    checks = [
        TCD_CHECK,
        {"name": "bm_flat", "kind": "bonnet_myers", "K": 1.0, "N": 2.0},
    ]
    cfg = write_config(tmp_path, checks)
    # full run fails because of the Bonnet-Myers control
    assert main(["run", cfg]) == 2
    capsys.readouterr()
    # the alias runs only the TCD check, which passes
    assert main(["check-tcd", "--config", cfg]) == 0
    out = capsys.readouterr().out
    assert "flat_tcd" in out and "bm_flat" not in out
    # asking for a kind the config lacks is a config error
    assert main(["check-tmcp", "--config", cfg]) == 1


def test_threads_env(tmp_path, capsys, monkeypatch):
    checks = [
        dict(TCD_CHECK, name="a"),
        {
            "name": "b",
            "kind": "midpoint",
            "mu0": "mu0",
            "mu1": "mu1",
            "p": 0.5,
            "K": 0.0,
            "N_grid": [2.0, 4.0],
            "tolerance": 0.01,
        },
    ]
    cfg = write_config(tmp_path, checks)
    monkeypatch.setenv("LOROT_THREADS", "2")
    assert main(["run", cfg]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("a:") and out[1].startswith("b:")
    monkeypatch.setenv("LOROT_THREADS", "junk")
    assert main(["run", cfg]) == 0
    assert "LOROT_THREADS" in capsys.readouterr().err


def test_transport_subcommand(tmp_path, capsys):
    doc = {
        "schema": 1,
        "space": BASE_SPACE,
        "mu0": [[0, 0.5], [1, 0.5]],
        "mu1": [[300, 0.5], [301, 0.5]],
        "p": 0.5,
    }
    cfg = tmp_path / "instance.json"
    cfg.write_text(json.dumps(doc))
    coupling = tmp_path / "coupling.csv"
    result = tmp_path / "result.json"
    code = main(["transport", "--config", str(cfg),
                 "--coupling", str(coupling), "--result", str(result)])
    assert code == 0
    out = capsys.readouterr().out
    assert "feasible=True" in out
    lines = coupling.read_text().strip().splitlines()
    assert lines[0] == "i,j,mass"
    doc = json.loads(result.read_text())
    assert doc["feasible"] is True and doc["p"] == 0.5
    assert isinstance(doc["objective"], float)


def test_bishop_gromov_flags(capsys):
    code = main(["bishop-gromov", "--T", "2", "--r", "0.5", "--R", "1",
                 "--K", "0", "--N", "2", "--resolution", "48"])
    assert code == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "ratio=" in out


def test_smooth_verify(tmp_path, capsys):
    ts = [k / 8 for k in range(9)]
    doc = {
        "schema": 1,
        "j_samples": [(1.0 + t) ** 2 for t in ts],
        "t_grid": ts,
        "theta": 1.0,
        "K": 0.0,
        "Nprime": 2.0,
    }
    cfg = tmp_path / "smooth.json"
    cfg.write_text(json.dumps(doc))
    assert main(["smooth-verify", "--config", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "hypothesis_holds=True" in out


def test_bundled_config_is_consistent():
    from importlib import resources

    text = resources.files("lorot").joinpath("configs/flat_tcd0.json").read_text()
    doc = json.loads(text)
    assert doc["schema"] == 1
    names = set(doc["measures"])
    for check in doc["checks"]:
        for key in ("mu0", "mu1"):
            if key in check:
                assert check[key] in names


@pytest.mark.skipif(shutil.which("lorot") is None, reason="console script not on PATH")
def test_console_script():
    proc = subprocess.run(
        ["lorot", "coeffs", "--K", "0", "--N", "2", "--t", "0.3", "--theta", "1"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert proc.stdout.strip() == "0.3"
