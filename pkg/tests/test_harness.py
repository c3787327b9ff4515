import csv
import json

import numpy as np
import pytest

from filmflow.errors import ConfigInvalid, IoFailure
from filmflow.harness import (
    config_hash,
    dump_coefficients,
    fitted_slope,
    load_config,
    run_epsilon_sweep,
    run_scenario,
    sha256_file,
)
from filmflow.scenarios import BUILTIN, builtin


def small(name, **time):
    raw = builtin(name)
    raw["grid"] = {"n1": 9, "n2": 9}
    raw["options"] = {"plots": False}
    if time:
        raw["time"].update(time)
    return raw


# ------------------------------------------------------------------ validation
@pytest.mark.parametrize("name", sorted(BUILTIN))
def test_builtin_scenarios_validate(name):
    cfg = load_config(builtin(name))
    assert cfg.name == name and cfg.steps >= 1


@pytest.mark.parametrize(
    "edit, path",
    [
        (lambda r: r.update(eps=[0.0]), "eps.0"),
        (lambda r: r.update(eps=[0.1, 0.9]), "eps.1"),
        (lambda r: r.update(colour="red"), "<root>"),
        (lambda r: r["physics"].update(nu=3.0), "physics.nu"),
        (lambda r: r["time"].update(T=0.0), "time.T"),
        (lambda r: r["time"].update(dt=0.03, T=0.1), "time.dt"),
        (lambda r: r["chart"].update(name="sphere"), "chart.name"),
        (lambda r: r["regime"].update(friction=0.2), "regime.friction"),
        (lambda r: r.update(schema_version=7), "schema_version"),
        (lambda r: r.pop("model"), "<root>"),
    ],
)
def test_invalid_config_names_field(edit, path):
    raw = builtin("couette")
    edit(raw)
    with pytest.raises(ConfigInvalid) as exc:
        load_config(raw)
    assert exc.value.path == path


def test_slider_trace_needs_plane_slider_geometry():
    raw = builtin("slider")
    raw["gap"] = {"name": "constant", "params": {"h0": 1.0}}
    with pytest.raises(ConfigInvalid) as exc:
        load_config(raw)
    assert exc.value.path == "regime.pressure"


def test_config_file_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigInvalid):
        load_config(bad)
    with pytest.raises(ConfigInvalid):
        load_config(tmp_path / "missing.json")
    good = tmp_path / "good.json"
    good.write_text(json.dumps(builtin("couette")))
    assert load_config(good).digest() == config_hash(builtin("couette"))


def test_config_hash_ignores_key_order():
    raw = builtin("couette")
    assert config_hash(raw) == config_hash(dict(reversed(list(raw.items()))))
    raw["seed"] = 5
    assert config_hash(raw) != config_hash(builtin("couette"))


def test_sweep_rejects_short_or_unordered_lists():
    with pytest.raises(ConfigInvalid):
        run_epsilon_sweep(small("couette"))
    raw = small("velocity_sweep")
    raw["eps"] = [0.05, 0.1, 0.2]
    with pytest.raises(ConfigInvalid):
        run_epsilon_sweep(raw)
    with pytest.raises(ConfigInvalid):
        run_epsilon_sweep(small("slider"))


def test_fitted_slope_of_power_law():
    eps = [0.2, 0.1, 0.05]
    assert fitted_slope(eps, [3 * e**1.5 for e in eps]) == pytest.approx(1.5, abs=1e-12)


# ------------------------------------------------------------------ runs
def _tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_manifest_lists_every_output(tmp_path):
    path = run_scenario(small("couette", T=0.05), tmp_path)
    manifest = json.loads(path.read_text())
    assert manifest["config_sha256"] == config_hash(small("couette", T=0.05))
    listed = {f["path"] for f in manifest["files"]}
    on_disk = set(_tree(tmp_path)) - {"manifest.json"}
    assert listed == on_disk
    for f in manifest["files"]:
        assert sha256_file(tmp_path / f["path"]) == f["sha256"]


def test_couette_run_keeps_residuals_at_roundoff(tmp_path):
    manifest = json.loads(run_scenario(small("couette", T=0.05), tmp_path).read_text())
    final = manifest["final_residuals"]["0.1"]
    assert max(final.values()) <= 1e-12


def test_repeated_runs_are_byte_identical(tmp_path):
    raw = small("traction_uniform", T=0.05)
    raw["options"]["plots"] = True
    run_scenario(raw, tmp_path / "a")
    run_scenario(raw, tmp_path / "b")
    a, b = _tree(tmp_path / "a"), _tree(tmp_path / "b")
    assert a == b and any(k.endswith(".png") for k in a)


def test_slider_summary_matches_closed_form(tmp_path):
    raw = builtin("slider")
    raw["options"] = {"plots": False}
    summary = json.loads(run_scenario(raw, tmp_path).read_text())["summary"]
    ref = summary["reference"]
    assert abs(summary["peak_pressure"] - ref["peak_pressure"]) <= 0.01 * ref["peak_pressure"]
    assert abs(summary["peak_xi1"] - ref["peak_xi1"]) <= 0.01
    assert abs(summary["load"] - ref["load_per_width"]) <= 0.01 * ref["load_per_width"]


def test_friction_decay_series_follows_ode(tmp_path):
    run_scenario(small("traction_decay"), tmp_path)
    series = json.loads((tmp_path / "series.json").read_text())
    C, h = 0.5, 1.0
    worst = max(abs(r["V1_mean"] - 1.0 / (1.0 + 2.0 * C * r["t"] / h)) for r in series)
    assert len(series) == 101 and worst <= 1e-3


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(IoFailure):
        run_scenario(small("couette", T=0.05), blocker / "sub")


def test_velocity_sweep_outputs(tmp_path):
    raw = small("velocity_sweep")
    raw["grid"] = {"n1": 17, "n2": 17}
    rep = run_epsilon_sweep(raw, out=tmp_path)
    assert rep.err_inf[0] > rep.err_inf[1] > rep.err_inf[2]
    assert abs(rep.compatibility_defect) <= 1e-9
    with open(tmp_path / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [float(r["eps"]) for r in rows] == [0.2, 0.1, 0.05]
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["slopes"]["err_inf"] == pytest.approx(rep.slopes["err_inf"])


# ------------------------------------------------------------------ coefficient dump
def _dump(tmp_path, chart, name):
    raw = small("couette")
    raw["chart"] = chart
    path = dump_coefficients(raw, path=tmp_path / name)
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    return header, np.loadtxt(path, delimiter=",", skiprows=1), path


def test_plane_dump_has_no_curvature(tmp_path):
    header, data, _ = _dump(tmp_path, {"name": "plane", "params": {}}, "plane.csv")
    for name in ("e", "f", "g", "A1", "A2"):
        assert not np.any(data[:, header.index(name)]), name
    assert np.all(data[:, header.index("E")] == 1.0)
    assert "-0" not in (tmp_path / "plane.csv").read_text().replace("e-0", "")


def test_cylinder_dump_values_and_repeatability(tmp_path):
    chart = {"name": "cylinder", "params": {"radius": 2.0}}
    header, data, p1 = _dump(tmp_path, chart, "a.csv")
    expected = dict(E=1.0, F=0.0, G=4.0, g=-2.0, A0=4.0, A1=2.0)
    for name, val in expected.items():
        assert np.max(np.abs(data[:, header.index(name)] - val)) <= 1e-14, name
    _, _, p2 = _dump(tmp_path, chart, "b.csv")
    assert p1.read_bytes() == p2.read_bytes()
    assert data.shape[0] == 81 and header[:2] == ["xi1", "xi2"]
