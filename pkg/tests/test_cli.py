import subprocess
import sys

import pytest

from vmlab import __version__
from vmlab.cli import main

from test_runner import SMALL


@pytest.fixture
def small_config(tmp_path):
    p = tmp_path / "small.ini"
    # the moment-growth audit needs a run long enough to leave the quadratic start-up regime
    text = SMALL.replace("inequalities, moments", "inequalities")
    p.write_text(text + "\n[history]\nhorizon = 0.4\n")
    return p


def test_version_entry_point():
    out = subprocess.run([sys.executable, "-m", "vmlab.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and __version__ in out.stdout


def test_run_pass_and_report(small_config, tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", str(small_config), "--out", str(out)]) == 0
    assert "overall PASS" in capsys.readouterr().out
    assert main(["report", str(out), "--out", str(tmp_path / "rep")]) == 0
    assert (tmp_path / "rep" / "summary.txt").read_bytes() == (out / "summary.txt").read_bytes()


def test_run_violation_exit_1(small_config, tmp_path):
    small_config.write_text(small_config.read_text().replace("[verify]", "[verify]\nenergy_tol = 1e-300"))
    assert main(["run", str(small_config), "--out", str(tmp_path / "run")]) == 1


def test_execution_errors_exit_2(tmp_path, capsys):
    assert main(["run", str(tmp_path / "missing.ini")]) == 2
    assert "no such config" in capsys.readouterr().err
    bad = tmp_path / "bad.ini"
    bad.write_text("[time]\ndt = 5\n")
    assert main(["run", str(bad)]) == 2
    assert "line 2" in capsys.readouterr().err
    assert main(["report", str(tmp_path / "nowhere")]) == 2


def test_halted_run_exit_2(tmp_path):
    cfg = tmp_path / "escape.ini"
    cfg.write_text(SMALL.replace("half_width = 2.0", "half_width = 1.2\nperiodic = false")
                   .replace("n_steps = 6", "n_steps = 30"))
    assert main(["run", str(cfg), "--out", str(tmp_path / "run")]) == 2
    assert (tmp_path / "run" / "FAILED").exists()
    assert main(["report", str(tmp_path / "run")]) == 2


def test_verify_lemma(tmp_path, capsys):
    assert main(["verify", "--lemma", "2.4c", "--out", str(tmp_path)]) == 0
    assert capsys.readouterr().out.startswith("2.4c")
    assert (tmp_path / "2_4c_samples.csv").exists() and (tmp_path / "2_4c_verdict.csv").exists()


def test_verify_spec_file(tmp_path, capsys):
    spec = tmp_path / "c.ini"
    spec.write_text("[sweep]\nlemma = 2.4c\ntheta = 0.5\nspeed = 0.6\n")
    assert main(["verify", str(spec), "--out", str(tmp_path / "o")]) == 0
    assert main(["verify", str(spec), "--lemma", "3.1", "--out", str(tmp_path / "o")]) == 2
    spec.write_text("[sweep]\nlemma = 2.4c\ntheta = 1.5\nspeed = 0.6\n")
    assert main(["verify", str(spec), "--out", str(tmp_path / "o")]) == 2
    assert "theta" in capsys.readouterr().err


def test_verify_unknown_target(tmp_path):
    assert main(["verify", "nonsense", "--out", str(tmp_path)]) == 2


def test_fields_compare(small_config, tmp_path, capsys, monkeypatch):
    out = tmp_path / "run"
    assert main(["run", str(small_config), "--out", str(out)]) == 0
    capsys.readouterr()
    monkeypatch.setenv("VMX_WORKERS", "2")
    assert main(["fields-compare", str(out), "2", "--tol", "100"]) == 0
    text = capsys.readouterr().out
    assert text.count(")  rel_err=") == 2 and "PASS" in text
    assert (out / "fields_compare.csv").read_text().count("\n") == 3
    assert main(["fields-compare", str(out), "2", "--tol", "0"]) == 1


def test_bad_worker_env(small_config, tmp_path, monkeypatch):
    out = tmp_path / "run"
    main(["run", str(small_config), "--out", str(out)])
    monkeypatch.setenv("VMX_WORKERS", "0")
    assert main(["fields-compare", str(out), "1"]) == 2
    assert main(["verify", "2.4c", "--out", str(tmp_path / "v")]) == 2
