"""Scenario configuration, runs, film-ratio sweeps and coefficient dumps.

Every run writes its files into one output directory together with a
``manifest.json`` that records the configuration hash and the sha256 of
each file.  Nothing time-dependent (clock, host) enters the outputs, so a
repeated run with the same configuration reproduces them byte for byte.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .coefficients import build_table
from .discretization import Grid2D
from .errors import ConfigInvalid, IoFailure
from .forces import BodyForce
from .gap import LinearGap, make_gap
from .geometry import make_chart
from .lubrication import LubricationBC, SliderTrace, slider_pressure, solve_lubrication
from .new_model import NewModel, RESIDUAL_NAMES, closure_defect, write_residual_json, write_snapshot_csv
from .shallow_water import ShallowWaterModel, TractionBC, make_pressure, write_series_json, write_state_csv

SCHEMA_VERSION = 1
EPS_RANGE = (1e-4, 0.5)

_velocity = {
    "oneOf": [
        {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        {
            "type": "object",
            "properties": {"name": {"type": "string"}, "params": {"type": "object"}},
            "required": ["name"],
            "additionalProperties": False,
        },
    ]
}
_pressure = {
    "oneOf": [
        {"type": "number"},
        {"const": "plane_slider"},
        {
            "type": "object",
            "properties": {
                "value": {"type": "number"},
                "slope": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                "rate": {"type": "number"},
            },
            "additionalProperties": False,
        },
    ]
}
_named = {
    "type": "object",
    "properties": {"name": {"type": "string"}, "params": {"type": "object"}},
    "required": ["name"],
    "additionalProperties": False,
}
_edge = {"enum": ["dirichlet", "neumann"]}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "model": {"enum": ["lubrication", "shallow_water", "new_model"]},
        "chart": _named,
        "gap": _named,
        "regime": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["velocity", "traction"]},
                "V": _velocity,
                "W": _velocity,
                "pressure": _pressure,
                "pi0": _pressure,
                "pi1": _pressure,
                "friction": {"type": "number"},
                "s0": {"enum": [-1, 1]},
                "inflow": _velocity,
                "edges": {
                    "type": "object",
                    "properties": {e: _edge for e in ("left", "right", "bottom", "top")},
                    "additionalProperties": False,
                },
            },
            "required": ["kind"],
            "additionalProperties": False,
        },
        "physics": {
            "type": "object",
            "properties": {
                "mu": {"type": "number", "exclusiveMinimum": 0},
                "rho0": {"type": "number", "exclusiveMinimum": 0},
                "nu": {"type": "number", "exclusiveMinimum": 0},
                "body_force": {
                    "type": "object",
                    "properties": {
                        "vector": {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3},
                        "depth_slope": {"type": "number"},
                    },
                    "additionalProperties": False,
                },
            },
            "required": ["mu", "rho0"],
            "additionalProperties": False,
        },
        "eps": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "grid": {
            "type": "object",
            "properties": {"n1": {"type": "integer", "minimum": 8}, "n2": {"type": "integer", "minimum": 8}},
            "required": ["n1", "n2"],
            "additionalProperties": False,
        },
        "time": {
            "type": "object",
            "properties": {"t0": {"type": "number"}, "dt": {"type": "number"}, "T": {"type": "number"}},
            "required": ["dt", "T"],
            "additionalProperties": False,
        },
        "options": {
            "type": "object",
            "properties": {
                "form": {"enum": ["reynolds", "lubric", "v2", "new"]},
                "p1_mode": {"enum": ["full", "leading"]},
                "N": {"type": "integer", "minimum": 1, "maximum": 3},
                "plots": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "output": {
            "type": "object",
            "properties": {"directory": {"type": "string"}},
            "additionalProperties": False,
        },
        "seed": {"type": "integer", "minimum": 0},
    },
    "required": ["schema_version", "model", "chart", "gap", "regime", "physics", "eps", "grid", "time"],
    "additionalProperties": False,
}


@dataclass
class ScenarioConfig:
    """Validated scenario with its physical objects built."""

    raw: dict
    name: str
    model: str
    chart: object
    gap: object
    bc: object
    mu: float
    rho0: float
    nu: float
    body: BodyForce | None
    eps: list
    grid: Grid2D
    t0: float
    dt: float
    T: float
    form: str | None
    p1_mode: str
    N: int
    plots: bool
    output: str | None
    seed: int

    @property
    def traction(self):
        return isinstance(self.bc, TractionBC)

    @property
    def steps(self):
        return int(round(self.T / self.dt))

    def digest(self):
        return config_hash(self.raw)


def config_hash(raw: dict) -> str:
    canon = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _schema_path(err):
    return ".".join(str(p) for p in err.absolute_path) or "<root>"


def load_config(source) -> ScenarioConfig:
    """Parse and validate a configuration given as a file path or a dictionary.

    Raises
    ------
    ConfigInvalid
        With ``path`` naming the offending field.
    """
    if isinstance(source, dict):
        raw = json.loads(json.dumps(source))
    else:
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise ConfigInvalid(f"cannot read configuration: {exc}", "<file>") from None
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"malformed JSON: {exc}", "<file>") from None
    if isinstance(raw, dict) and raw.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise ConfigInvalid(f"unsupported schema_version {raw.get('schema_version')!r}", "schema_version")
    errors = sorted(jsonschema.Draft202012Validator(CONFIG_SCHEMA).iter_errors(raw), 
                    key=lambda e: [str(p) for p in e.absolute_path])
    if errors:
        err = errors[0]
        raise ConfigInvalid(err.message, _schema_path(err))
    return _build(raw)


def _build(raw) -> ScenarioConfig:
    phys = raw["physics"]
    mu, rho0 = float(phys["mu"]), float(phys["rho0"])
    nu = float(phys.get("nu", mu / rho0))
    if abs(nu * rho0 - mu) > 1e-12 * max(1.0, abs(mu)):
        raise ConfigInvalid(f"nu * rho0 = {nu * rho0!r} differs from mu = {mu!r}", "physics.nu")
    eps = [float(e) for e in raw["eps"]]
    for k, e in enumerate(eps):
        if not (EPS_RANGE[0] < e <= EPS_RANGE[1]) or not math.isfinite(e):
            raise ConfigInvalid(f"film ratio {e!r} outside ({EPS_RANGE[0]:g}, {EPS_RANGE[1]:g}]", f"eps.{k}")
    tm = raw["time"]
    t0, dt, T = float(tm.get("t0", 0.0)), float(tm["dt"]), float(tm["T"])
    if not T > 0:
        raise ConfigInvalid("final time T must be positive", "time.T")
    if not dt > 0:
        raise ConfigInvalid("time step must be positive", "time.dt")
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-9 * max(T, 1.0):
        raise ConfigInvalid("T must be a whole number of time steps", "time.dt")
    chart = _prefixed(make_chart, raw["chart"]["name"], raw["chart"].get("params"), "chart")
    gap = _prefixed(make_gap, raw["gap"]["name"], raw["gap"].get("params"), "gap")
    reg = dict(raw["regime"])
    kind = reg.pop("kind")
    model = raw["model"]
    allowed = {"velocity": {"V", "W", "pressure"}, "traction": {"pi0", "pi1", "friction", "s0", "inflow", "edges"}}
    for key in reg:
        if key not in allowed[kind]:
            raise ConfigInvalid(f"field {key!r} does not belong to the {kind} regime", f"regime.{key}")
    if kind == "velocity":
        if "pressure" in reg and isinstance(reg["pressure"], dict):
            reg["pressure"] = make_pressure(reg["pressure"])
        elif reg.get("pressure") == "plane_slider":
            reg["pressure"] = _slider_trace(raw, gap, mu)
        bc = _prefixed(lambda **kw: LubricationBC(**kw), None, reg, "regime")
    else:
        bc = _prefixed(lambda **kw: TractionBC(**kw), None, reg, "regime")
    if model == "lubrication" and kind != "velocity":
        raise ConfigInvalid("the lubrication model needs the velocity regime", "regime.kind")
    if model == "shallow_water" and kind != "traction":
        raise ConfigInvalid("the shallow-water model needs the traction regime", "regime.kind")
    body = None
    if "body_force" in phys:
        body = BodyForce(**phys["body_force"])
    opts = raw.get("options", {})
    form = opts.get("form")
    if form is not None:
        valid = ("reynolds", "lubric") if kind == "velocity" else ("v2", "new")
        if form not in valid:
            raise ConfigInvalid(f"form {form!r} does not apply to the {kind} regime", "options.form")
    return ScenarioConfig(
        raw=raw,
        name=raw.get("name", "scenario"),
        model=model,
        chart=chart,
        gap=gap,
        bc=bc,
        mu=mu,
        rho0=rho0,
        nu=nu,
        body=body,
        eps=eps,
        grid=Grid2D(int(raw["grid"]["n1"]), int(raw["grid"]["n2"])),
        t0=t0,
        dt=dt,
        T=T,
        form=form,
        p1_mode=opts.get("p1_mode", "full"),
        N=int(opts.get("N", 3)),
        plots=bool(opts.get("plots", True)),
        output=raw.get("output", {}).get("directory"),
        seed=int(raw.get("seed", 0)),
    )


def _slider_trace(raw, gap, mu):
    """Closed-form slider edge trace; needs a plane, an xi1-only linear gap and V = (U, 0)."""
    V = raw["regime"].get("V", [0.0, 0.0])
    W = raw["regime"].get("W", [0.0, 0.0])
    ok = (raw["chart"]["name"] == "plane" and isinstance(gap, LinearGap) and gap.g2 == 0.0 and gap.rate == 0.0
          and isinstance(V, list) and V[1] == 0.0 and isinstance(W, list) and W == [0.0, 0.0])
    if not ok:
        raise ConfigInvalid("the plane_slider trace needs a plane, a static xi1-linear gap, "
                            "V = [U, 0] and W = [0, 0]", "regime.pressure")
    return SliderTrace(gap.h0, gap.g1, mu, float(V[0]))


def _prefixed(factory, name, params, prefix):
    """Call a factory and re-anchor any ConfigInvalid path under ``prefix``."""
    try:
        if name is None:
            return factory(**(params or {}))
        return factory(name, params)
    except ConfigInvalid as exc:
        path = exc.path if exc.path.startswith(prefix) else f"{prefix}.{exc.path}" if exc.path else prefix
        raise ConfigInvalid(exc.message, path) from None
    except TypeError as exc:
        raise ConfigInvalid(str(exc), prefix) from None


# ------------------------------------------------------------------ output helpers
def _out_dir(cfg: ScenarioConfig, out):
    path = Path(out if out is not None else cfg.output or f"out/{cfg.name}")
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create output directory {path}: {exc}") from None
    if not os.access(path, os.W_OK):
        raise IoFailure(f"output directory {path} is not writable")
    return path


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(cfg: ScenarioConfig, root: Path, files, extra=None):
    """``manifest.json`` listing every output (relative path, size, sha256)."""
    entries = []
    for f in sorted({Path(f) for f in files}):
        entries.append({"path": f.relative_to(root).as_posix(), "bytes": f.stat().st_size, "sha256": sha256_file(f)})
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "scenario": cfg.name,
        "model": cfg.model,
        "config_sha256": cfg.digest(),
        "seed": cfg.seed,
        "files": entries,
    }
    if extra:
        manifest.update(extra)
    path = root / "manifest.json"
    _write_json(manifest, path)
    return path


def _write_json(obj, path):
    try:
        with open(path, "w") as fh:
            json.dump(obj, fh, indent=1, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from None


def _guard_io(fn, *args):
    try:
        return fn(*args)
    except OSError as exc:
        raise IoFailure(str(exc)) from None


def _eps_tag(eps):
    return f"eps_{eps:.6g}"


# ------------------------------------------------------------------ single runs
def _run_lubrication(cfg: ScenarioConfig, root: Path):
    sol = solve_lubrication(cfg.grid, cfg.chart, cfg.gap, cfg.bc, cfg.mu, cfg.t0, N=cfg.N, form=cfg.form or "reynolds")
    files = [root / "pressure.csv", root / "summary.json"]
    _guard_io(sol.to_csv, files[0])
    X1, X2 = cfg.grid.mesh()
    k = np.unravel_index(np.argmax(sol.pressure), sol.pressure.shape)
    summary = {
        "peak_pressure": float(sol.pressure[k]),
        "peak_xi1": float(X1[k]),
        "peak_xi2": float(X2[k]),
        "load": sol.load(),
        "compatibility_defect": sol.compatibility_defect(),
        "solver_residual": float(sol.system.info.get("residual", 0.0)),
        "method": sol.system.info.get("method"),
    }
    if isinstance(cfg.bc.pressure, SliderTrace):
        tr = cfg.bc.pressure
        _, x_star, p_star, load = slider_pressure(0.5, tr.h0, tr.g1, tr.mu, tr.U)
        summary["reference"] = {"peak_pressure": p_star, "peak_xi1": x_star, "load_per_width": load}
    _write_json(summary, files[1])
    if cfg.plots:
        from .plotting import field_plot

        files.append(field_plot(sol.pressure, cfg.grid, root / "pressure.png", "rescaled pressure"))
    return files, {"summary": summary}


def _run_shallow_water(cfg: ScenarioConfig, root: Path):
    model = ShallowWaterModel(cfg.grid, cfg.chart, cfg.gap, cfg.bc, cfg.mu, cfg.rho0, cfg.body, cfg.N,
                              cfg.form or "v2")
    state = model.initial_state(t=cfg.t0)
    series = []

    def record(s):
        series.append({
            "t": float(s.t),
            "V1_mean": float(np.mean(s.V[0])),
            "V2_mean": float(np.mean(s.V[1])),
            "V_max": float(np.max(np.abs(s.V))),
            "p0_mean": float(np.mean(s.p0)),
        })

    record(state)
    state = model.run(state, cfg.dt, cfg.T, record)
    files = [root / "state.csv", root / "series.json"]
    _guard_io(write_state_csv, state, cfg.grid, files[0])
    _guard_io(write_series_json, series, files[1])
    if cfg.plots:
        from .plotting import series_plot

        t = [r["t"] for r in series]
        files.append(series_plot(t, {"mean V1": [r["V1_mean"] for r in series],
                                     "mean V2": [r["V2_mean"] for r in series]},
                                 root / "series.png", "time", "velocity"))
    return files, {}


def run_new_model(cfg: ScenarioConfig, eps, record_every=1):
    """Run the cubic-in-depth model for one film ratio; returns ``(model, final stack, history)``."""
    model = NewModel(cfg.grid, cfg.chart, cfg.gap, cfg.bc, eps, cfg.mu, cfg.rho0, cfg.body, cfg.N, cfg.p1_mode)
    stack = model.initial_state(t=cfg.t0)
    history = [model.diagnostics(stack)]
    step = [0]

    def record(s):
        step[0] += 1
        if step[0] % record_every == 0 or step[0] == cfg.steps:
            d = model.diagnostics(s)
            d["step"] = step[0]
            history.append(d)

    history[0]["step"] = 0
    stack = model.run(stack, cfg.dt, cfg.T, record)
    return model, stack, history


def _run_new(cfg: ScenarioConfig, root: Path):
    files, finals = [], {}
    for eps in cfg.eps:
        sub = root / _eps_tag(eps)
        sub.mkdir(exist_ok=True)
        model, stack, history = run_new_model(cfg, eps)
        snap, res = sub / "snapshot.csv", sub / "residuals.json"
        _guard_io(write_snapshot_csv, stack, cfg.grid, snap)
        _guard_io(write_residual_json, history, res)
        files += [snap, res]
        if cfg.plots:
            from .plotting import field_plot

            files.append(field_plot(stack.p0, cfg.grid, sub / "p0.png", f"leading pressure, eps={eps:g}"))
        finals[f"{eps:.6g}"] = {k: history[-1][k] for k in ("closure",) + RESIDUAL_NAMES}
    return files, {"final_residuals": finals}


def run_scenario(config, out=None):
    """Run one scenario and write its outputs plus ``manifest.json``.

    Returns the manifest path.

    Raises
    ------
    ConfigInvalid, IoFailure
        And any solver failure raised by the model.
    """
    cfg = config if isinstance(config, ScenarioConfig) else load_config(config)
    root = _out_dir(cfg, out)
    _write_json(cfg.raw, root / "config.json")
    runner = {"lubrication": _run_lubrication, "shallow_water": _run_shallow_water, "new_model": _run_new}[cfg.model]
    files, extra = runner(cfg, root)
    return write_manifest(cfg, root, files + [root / "config.json"], extra)


# ------------------------------------------------------------------ sweeps
@dataclass
class ConvergenceReport:
    """Per-film-ratio errors against the limit model and fitted log-log slopes."""

    scenario: str
    regime: str
    eps: list
    err_inf: list
    err_l2: list
    closure: list
    u_norms: list
    slopes: dict
    runtime: dict = field(default_factory=dict)
    compatibility_defect: float | None = None

    def rows(self):
        for k, e in enumerate(self.eps):
            n = self.u_norms[k]
            yield {
                "eps": e,
                "err_inf": self.err_inf[k],
                "err_l2": self.err_l2[k],
                "closure": self.closure[k],
                "u1_norm": n[1],
                "u2_norm": n[2],
                "u3_norm": n[3],
                "ratio_21": n[2] / n[1] if n[1] else float("nan"),
                "ratio_32": n[3] / n[2] if n[2] else float("nan"),
            }

    def to_dict(self):
        return {
            "scenario": self.scenario,
            "regime": self.regime,
            "rows": list(self.rows()),
            "slopes": self.slopes,
            "compatibility_defect": self.compatibility_defect,
        }


def fitted_slope(eps, values):
    """Least-squares slope of ``log(values)`` against ``log(eps)``."""
    x, y = np.log(np.asarray(eps, float)), np.log(np.asarray(values, float))
    return float(np.polyfit(x, y, 1)[0])


def _interior(a):
    return a[..., 1:-1, 1:-1]


def _sweep_member(cfg: ScenarioConfig, eps, limit):
    t0 = time.perf_counter()
    model, stack, _ = run_new_model(cfg, eps, record_every=max(cfg.steps, 1))
    tb = model.table(stack.t)
    if cfg.traction:
        diff = stack.u[0] - limit
        scale = 1.0
    else:
        diff = eps**2 * stack.p0 - limit
        scale = float(np.max(np.abs(limit))) or 1.0
    err_inf = float(np.max(np.abs(diff))) / scale
    err_l2 = float(np.sqrt(np.mean(diff**2))) / scale
    closure = float(np.max(np.abs(_interior(closure_defect(stack, tb)))))
    norms = [float(np.max(np.abs(stack.u[n]))) for n in range(4)]
    return dict(eps=eps, err_inf=err_inf, err_l2=err_l2, closure=closure, norms=norms,
                seconds=time.perf_counter() - t0)


def limit_solution(cfg: ScenarioConfig):
    """Limit-model field matched against the new model: ``(field, extra info)``."""
    if cfg.traction:
        sw = ShallowWaterModel(cfg.grid, cfg.chart, cfg.gap, cfg.bc, cfg.mu, cfg.rho0, cfg.body, cfg.N,
                               cfg.form or "v2")
        state = sw.run(sw.initial_state(t=cfg.t0), cfg.dt, cfg.T)
        return state.V, {}
    sol = solve_lubrication(cfg.grid, cfg.chart, cfg.gap, cfg.bc, cfg.mu, cfg.t0 + cfg.T, N=cfg.N,
                            form=cfg.form or "lubric")
    return sol.pressure, {"compatibility_defect": sol.compatibility_defect()}


def run_epsilon_sweep(config, out=None, threads=1):
    """Run the new model for every film ratio and compare with the limit model.

    Raises
    ------
    ConfigInvalid
        Fewer than three film ratios, or a list that is not strictly decreasing.
    """
    cfg = config if isinstance(config, ScenarioConfig) else load_config(config)
    if cfg.model != "new_model":
        raise ConfigInvalid("sweeps run the new model", "model")
    if len(cfg.eps) < 3:
        raise ConfigInvalid("a sweep needs at least three film ratios", "eps")
    if any(b >= a for a, b in zip(cfg.eps, cfg.eps[1:])):
        raise ConfigInvalid("film ratios must be strictly decreasing", "eps")
    t_start = time.perf_counter()
    limit, info = limit_solution(cfg)
    t_limit = time.perf_counter() - t_start
    workers = max(1, int(threads))
    if workers == 1:
        members = [_sweep_member(cfg, e, limit) for e in cfg.eps]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            members = list(pool.map(lambda e: _sweep_member(cfg, e, limit), cfg.eps))
    eps = [m["eps"] for m in members]
    norms = [m["norms"] for m in members]
    slopes = {
        "err_inf": fitted_slope(eps, [m["err_inf"] for m in members]),
        "err_l2": fitted_slope(eps, [m["err_l2"] for m in members]),
        "closure": fitted_slope(eps, [m["closure"] for m in members]),
    }
    if all(n[1] > 0 and n[2] > 0 and n[3] > 0 for n in norms):
        slopes["ratio_21"] = fitted_slope(eps, [n[2] / n[1] for n in norms])
        slopes["ratio_32"] = fitted_slope(eps, [n[3] / n[2] for n in norms])
    report = ConvergenceReport(
        scenario=cfg.name,
        regime="traction" if cfg.traction else "velocity",
        eps=eps,
        err_inf=[m["err_inf"] for m in members],
        err_l2=[m["err_l2"] for m in members],
        closure=[m["closure"] for m in members],
        u_norms=norms,
        slopes=slopes,
        runtime={"limit_seconds": t_limit, "member_seconds": [m["seconds"] for m in members],
                 "total_seconds": time.perf_counter() - t_start},
        compatibility_defect=info.get("compatibility_defect"),
    )
    if out is not None:
        write_sweep_outputs(cfg, report, out)
    return report


def write_sweep_outputs(cfg, report: ConvergenceReport, out):
    root = _out_dir(cfg, out)
    table = root / "sweep.csv"
    rows = list(report.rows())
    try:
        with open(table, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            for r in rows:
                w.writerow({k: f"{v:.17g}" for k, v in r.items()})
    except OSError as exc:
        raise IoFailure(f"cannot write {table}: {exc}") from None
    _write_json(report.to_dict(), root / "report.json")
    _write_json(report.runtime, root / "timing.json")
    _write_json(cfg.raw, root / "config.json")
    files = [table, root / "report.json", root / "timing.json", root / "config.json"]
    if cfg.plots:
        from .plotting import convergence_plot

        files.append(convergence_plot(report, root / "convergence.png"))
    return write_manifest(cfg, root, files)


# ------------------------------------------------------------------ coefficient dump
def dump_coefficients(config, t=None, path=None):
    """Write every coefficient family at every node as CSV (17 significant digits).

    Columns are ``xi1, xi2`` followed by the families in a fixed order.
    Returns the file path.
    """
    cfg = config if isinstance(config, ScenarioConfig) else load_config(config)
    t = cfg.t0 if t is None else float(t)
    X1, X2 = cfg.grid.mesh()
    table = build_table(cfg.chart, cfg.gap, X1, X2, t, N=cfg.N)
    arrays = table.named_arrays()
    names = ["xi1", "xi2"] + list(arrays)
    cols = np.column_stack([X1.ravel(), X2.ravel()] + [np.asarray(arrays[k]).ravel() for k in arrays])
    cols = cols + 0.0  # no signed zeros in the text output
    if path is None:
        path = _out_dir(cfg, None) / "coefficients.csv"
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savetxt(path, cols, delimiter=",", header=",".join(names), comments="", fmt="%.17g")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from None
    return path
