"""Built-in oracle suites used by ``filmflow verify`` and the acceptance tests.

Each check returns a :class:`CheckResult` with the measured quantities, the
threshold it was held to and the wall-clock time.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .coefficients import build_table, jacobian_inverse_oracle, series_gradients
from .discretization import Grid2D
from .gap import ConstantGap, LinearGap, SinusoidalGap
from .geometry import BUILTIN_CHARTS, make_chart, second_form_variants
from .harness import fitted_slope, load_config, run_epsilon_sweep
from .lubrication import LubricationBC, SliderTrace, slider_pressure, solve_lubrication
from .new_model import NewModel
from .scenarios import builtin
from .shallow_water import PressureProfile

SWEEP_EPS = (0.2, 0.1, 0.05)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self):
        keys = ", ".join(f"{k}={_fmt(v)}" for k, v in self.detail.items())
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {keys} ({self.seconds:.2f} s)"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    if isinstance(v, dict):
        return "{" + ", ".join(f"{k}: {_fmt(x)}" for k, x in v.items()) + "}"
    return str(v)


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


# ---------------------------------------------------------------- geometry series
def inverse_jacobian_errors(chart, gap, eps_values=SWEEP_EPS, t=0.3, n=5):
    """Max deviation of the truncated inverse-Jacobian series from direct inversion."""
    s = np.linspace(0.1, 0.9, n)
    X1, X2, X3 = np.meshgrid(s, s, [0.0, 0.5, 1.0], indexing="ij")
    tb = build_table(chart, gap, X1, X2, t)
    errs = []
    for eps in eps_values:
        approx = series_gradients(tb.series, tb.h, eps, X3)
        exact = jacobian_inverse_oracle(chart, gap, eps, X1, X2, X3, t)
        errs.append(float(np.max(np.abs(approx - exact))))
    return errs


@_timed
def check_inverse_jacobian(min_slope=3.8, roundoff=1e-13):
    """Series error slope on the curved charts; the plane is exact, so its error must be roundoff."""
    gap = SinusoidalGap()
    detail, ok = {}, True
    for name in ("plane", "cylinder", "torus"):
        errs = inverse_jacobian_errors(make_chart(name), gap)
        if max(errs) <= roundoff:
            detail[name] = {"max_error": max(errs)}
        else:
            slope = fitted_slope(SWEEP_EPS, errs)
            detail[name] = {"slope": slope}
            ok &= slope >= min_slope
    return CheckResult("inverse-Jacobian series", ok, detail)


# ---------------------------------------------------------------- identities
def identity_defects(chart, rng, samples=100, t=0.37):
    """Largest violation of each coefficient identity at random points."""
    x1, x2 = rng.uniform(0.05, 0.95, samples), rng.uniform(0.05, 0.95, samples)
    tb = build_table(chart, SinusoidalGap(), x1, x2, t)
    fr = tb.frame
    eye = np.eye(2)[:, :, None]
    f_forms = second_form_variants(fr)["f"]
    out = {
        "B0_identity": np.max(np.abs(tb.B[0, :2, :2] - eye)),
        "J00_metric": np.max(np.abs(tb.J[0, 0, :2, :2] - fr.M / fr.A0)),
        "Sbar_split": np.max(np.abs(tb.Sbar - (tb.P0[:, :3] + tb.chi))),
        "f_forms": max(np.max(np.abs(f - f_forms[0])) for f in f_forms[1:]),
    }
    return {k: float(v) for k, v in out.items()}


@_timed
def check_identities(seed=0, tol=1e-10, samples=100):
    rng = np.random.default_rng(seed)
    detail, worst = {}, 0.0
    for name in sorted(BUILTIN_CHARTS):
        d = identity_defects(make_chart(name), rng, samples)
        worst = max(worst, max(d.values()))
        detail[name] = max(d.values())
    detail["worst"] = worst
    return CheckResult("coefficient identities", worst <= tol, detail)


# ---------------------------------------------------------------- classical reductions
def slider_errors(sizes=(33, 65, 129), h0=1.5, g1=-0.5):
    """Relative max error of the slider pressure against the closed form at each grid size."""
    errs = []
    for n in sizes:
        g = Grid2D(n, n)
        bc = LubricationBC(V=(1.0, 0.0), W=(0.0, 0.0), pressure=SliderTrace(h0, g1))
        sol = solve_lubrication(g, make_chart("plane"), LinearGap(h0, g1), bc, 1.0, 0.0)
        X1, _ = g.mesh()
        exact = slider_pressure(X1, h0, g1)[0]
        errs.append(float(np.max(np.abs(sol.pressure - exact)) / np.max(np.abs(exact))))
    return errs


def reconstruction_errors():
    """Couette and Poiseuille profiles rebuilt from lubrication solves on a flat film."""
    g = Grid2D(17, 17)
    plane, gap = make_chart("plane"), ConstantGap(1.0)
    depths = np.linspace(0.0, 1.0, 5)
    cou = solve_lubrication(g, plane, gap, LubricationBC(V=(0.0, 0.0), W=(1.0, 0.0), pressure=0.0), 1.0, 0.0)
    e_c = max(float(np.max(np.abs(cou.velocity(z)[0] - z))) for z in depths)
    e_c = max(e_c, max(float(np.max(np.abs(cou.velocity(z)[1]))) for z in depths))
    G, mu = 2.0, 0.7
    poi = solve_lubrication(g, plane, gap, LubricationBC(pressure=PressureProfile(0.0, (-G, 0.0))), mu, 0.0)
    e_p = max(float(np.max(np.abs(poi.velocity(z)[0] - (z - z**2) * G / (2 * mu)))) for z in depths)
    return e_c, e_p


@_timed
def check_reductions(sizes=(33, 65, 129), rel_tol=0.01, min_order=1.8, exact_tol=1e-12):
    errs = slider_errors(sizes)
    order = fitted_slope([1.0 / (n - 1) for n in sizes], errs)
    e_c, e_p = reconstruction_errors()
    ok = errs[-1] <= rel_tol and order >= min_order and e_c <= exact_tol and e_p <= exact_tol
    return CheckResult("classical reductions", ok,
                       {"slider_rel_error": errs, "order": order, "couette": e_c, "poiseuille": e_p})


# ---------------------------------------------------------------- sweeps
@_timed
def check_velocity_sweep(min_order=0.8, compat_tol=1e-9, threads=1):
    rep = run_epsilon_sweep(load_config(builtin("velocity_sweep")), threads=threads)
    order = rep.slopes["err_inf"]
    ok = order >= min_order and abs(rep.compatibility_defect) <= compat_tol
    return CheckResult("pressure-driven sweep", ok, {"errors": rep.err_inf, "order": order,
                                                     "compatibility_defect": rep.compatibility_defect})


def traction_report(threads=1):
    return run_epsilon_sweep(load_config(builtin("traction_sweep")), threads=threads)


@_timed
def check_traction_sweep(report=None, min_order=0.8):
    rep = report or traction_report()
    order = rep.slopes["err_inf"]
    return CheckResult("shear-driven sweep", order >= min_order, {"errors": rep.err_inf, "order": order})


@_timed
def check_order_tags(report=None, min_slope=0.8):
    rep = report or traction_report()
    s21, s32 = rep.slopes["ratio_21"], rep.slopes["ratio_32"]
    return CheckResult("coefficient size ordering", min(s21, s32) >= min_slope, {"ratio_21": s21, "ratio_32": s32})


@_timed
def check_closure(report=None, min_order=1.8):
    rep = report or traction_report()
    order = rep.slopes["closure"]
    C = max(c / e**2 for c, e in zip(rep.closure, rep.eps))
    return CheckResult("vertical closure", order >= min_order, {"closure": rep.closure, "order": order, "C": C})


# ---------------------------------------------------------------- steady fixtures
def steady_drift(name, steps=100):
    """Largest per-step change of the primary fields over ``steps`` steps."""
    cfg = load_config(builtin(name))
    model = NewModel(cfg.grid, cfg.chart, cfg.gap, cfg.bc, cfg.eps[0], cfg.mu, cfg.rho0, cfg.body, cfg.N)
    s = model.initial_state(t=cfg.t0)
    worst = 0.0
    for _ in range(steps):
        new = model.step(s, cfg.dt)
        worst = max(worst, float(np.max(np.abs(new.u - s.u))), float(np.max(np.abs(new.p0 - s.p0))))
        s = new
    return worst


@_timed
def check_steady(tol=1e-10, steps=100):
    c, t = steady_drift("couette", steps), steady_drift("traction_uniform", steps)
    return CheckResult("steady fixtures", max(c, t) <= tol, {"couette": c, "traction_uniform": t})


QUICK_CHECKS = (check_inverse_jacobian, check_identities, check_reductions, check_steady)


def run_quick(seed=0):
    out = []
    for fn in QUICK_CHECKS:
        out.append(fn(seed=seed) if fn is check_identities else fn())
    return out


def run_full(seed=0, threads=1):
    out = run_quick(seed)
    out.append(check_velocity_sweep(threads=threads))
    rep = traction_report(threads)
    out += [check_traction_sweep(rep), check_order_tags(rep), check_closure(rep)]
    return out
