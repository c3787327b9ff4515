import json
import subprocess
import sys

import pytest

from filmflow.cli import EXIT_CHECK, EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, main
from filmflow.scenarios import builtin


def write_config(tmp_path, raw, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(raw))
    return str(path)


def couette(tmp_path, **time):
    raw = builtin("couette")
    raw["grid"] = {"n1": 9, "n2": 9}
    raw["options"] = {"plots": False}
    raw["time"].update(time or {"T": 0.05})
    return write_config(tmp_path, raw)


def test_run_writes_manifest(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", "--config", couette(tmp_path), "--out", str(out)]) == EXIT_OK
    assert capsys.readouterr().out.strip() == str(out / "manifest.json")
    assert (out / "eps_0.1" / "snapshot.csv").exists()


def test_builtin_name_accepted(tmp_path):
    assert main(["dump-coeffs", "--config", "slider", "--out", str(tmp_path), "--time", "0.0"]) == EXIT_OK
    assert (tmp_path / "coefficients.csv").exists()


def test_seed_recorded_in_manifest(tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--config", couette(tmp_path), "--out", str(out), "--seed", "42"]) == EXIT_OK
    assert json.loads((out / "manifest.json").read_text())["seed"] == 42


@pytest.mark.parametrize(
    "edit, fragment",
    [
        (lambda r: r.pop("model"), "'model' is a required property"),
        (lambda r: r.update(eps=[0.0]), "eps.0"),
        (lambda r: r.update(extra=1), "Additional properties"),
    ],
)
def test_invalid_config_exits_two(tmp_path, capsys, edit, fragment):
    raw = builtin("couette")
    edit(raw)
    assert main(["run", "--config", write_config(tmp_path, raw), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert fragment in capsys.readouterr().err


def test_sweep_needs_three_ratios(tmp_path, capsys):
    assert main(["sweep", "--config", couette(tmp_path), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "three film ratios" in capsys.readouterr().err


def test_missing_config_and_bad_flags(tmp_path):
    assert main(["run"]) == EXIT_CONFIG
    assert main(["run", "--config", str(tmp_path / "none.json")]) == EXIT_CONFIG
    assert main(["run", "--config", couette(tmp_path), "--threads", "0"]) == EXIT_CONFIG
    assert main(["run", "--config", couette(tmp_path), "--seed", "-1"]) == EXIT_CONFIG


def test_solver_failure_exits_three(tmp_path, capsys):
    raw = builtin("traction_uniform")
    raw["options"] = {"plots": False}
    raw["time"].update(dt=0.5, T=0.5)
    assert main(["run", "--config", write_config(tmp_path, raw), "--out", str(tmp_path / "o")]) == EXIT_SOLVER
    assert "CFLViolation" in capsys.readouterr().err


def test_unwritable_output_exits_two(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["run", "--config", couette(tmp_path), "--out", str(blocker / "sub")]) == EXIT_CONFIG


def test_sweep_prints_slopes(tmp_path, capsys):
    raw = builtin("velocity_sweep")
    raw["grid"] = {"n1": 17, "n2": 17}
    raw["options"]["plots"] = False
    cfg = write_config(tmp_path, raw)
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "o"), "--threads", "3"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.count("eps=") == 3 and "slopes: err_inf=" in out


def test_verify_quick(tmp_path, capsys):
    assert main(["verify", "--quick", "--out", str(tmp_path)]) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines and all(line.startswith("PASS") for line in lines)
    payload = json.loads((tmp_path / "verify.json").read_text())
    assert len(payload) == len(lines) and all(r["passed"] for r in payload)


def test_verify_failure_exits_four(monkeypatch, capsys):
    from filmflow import verification

    failing = verification.CheckResult("always fails", False, {"reason": "forced"}, 0.0)
    monkeypatch.setattr(verification, "run_quick", lambda seed: [failing])
    assert main(["verify", "--quick"]) == EXIT_CHECK
    assert "FAIL" in capsys.readouterr().out


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "filmflow.cli", "run", "--config", couette(tmp_path),
                           "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == EXIT_OK, proc.stderr
