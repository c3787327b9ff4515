"""Depth-averaged momentum model for films bounded by prescribed normal tractions.

The prognostic field is the tangential velocity ``V`` (components on a1,
a2), identical at both walls; the pressure is diagnostic.  Viscous
diffusion ``nu J00 : grad grad V`` is integrated implicitly, everything
else explicitly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .coefficients import CoefficientTable, build_table
from .discretization import Grid2D, ImplicitDiffusion, check_cfl, grad, hessian, time_step_imex
from .errors import ConfigInvalid, MissingCoefficient
from .forces import BodyForce, QuadraticFriction
from .velocity import WallVelocity, make_velocity


class PressureProfile:
    """Affine wall pressure ``value + slope[0] * xi1 + slope[1] * xi2 + rate * t``."""

    def __init__(self, value=0.0, slope=(0.0, 0.0), rate=0.0):
        self.value = float(value)
        self.slope = np.asarray(slope, float)
        if self.slope.shape != (2,):
            raise ConfigInvalid("pressure slope needs two components", "bc.pi")
        self.rate = float(rate)

    def __call__(self, x1, x2, t):
        return self.value + self.slope[0] * x1 + self.slope[1] * x2 + self.rate * t

    def grad(self, x1, x2, t):
        return self.slope.reshape((2,) + (1,) * np.ndim(x1)) * np.ones(np.shape(x1))


def make_pressure(spec):
    if isinstance(spec, PressureProfile):
        return spec
    if isinstance(spec, dict):
        try:
            return PressureProfile(**spec)
        except TypeError as exc:
            raise ConfigInvalid(str(exc), "bc.pi") from None
    return PressureProfile(value=float(spec))


@dataclass
class TractionBC:
    """Wall pressures, friction law, orientation sign and lateral conditions.

    ``edges`` maps each of left/right/bottom/top to ``"dirichlet"`` (the
    velocity is held at ``inflow``) or ``"neumann"`` (zero normal gradient).
    """

    pi0: object = 0.0
    pi1: object = None
    friction: float = 0.0
    s0: int = -1
    edges: dict = field(default_factory=dict)
    inflow: object = None

    def __post_init__(self):
        self.pi0 = make_pressure(self.pi0)
        self.pi1 = self.pi0 if self.pi1 is None else make_pressure(self.pi1)
        if self.s0 not in (-1, 1):
            raise ConfigInvalid("orientation sign must be -1 or +1", "bc.s0")
        self.friction_law = QuadraticFriction(self.friction)
        self.inflow = make_velocity(self.inflow)
        for e, kind in self.edges.items():
            if kind not in ("dirichlet", "neumann"):
                raise ConfigInvalid(f"edge condition must be dirichlet or neumann, got {kind!r}", f"bc.edges.{e}")


@dataclass
class ShallowWaterState:
    V: np.ndarray
    p0: np.ndarray
    t: float


def depth_forcing(table: CoefficientTable, V, bc: TractionBC, rho0, body: BodyForce | None, integral=False):
    """Forcing ``F[i]`` with both walls moving at ``V`` and the normal speed of the lower wall."""
    body = body or BodyForce()
    fr = table.frame
    U = QuadraticFriction.wall_vector(fr, V, fr.w)
    fR = bc.friction_law(U, rho0)
    return table.forcing(body.coefficients(table), fR, fR, bc.s0, rho0, integral=integral)


def sw_rhs(state, table: CoefficientTable, grid: Grid2D, bc: TractionBC, nu, rho0, body=None, form="v2",
           include_diffusion=True):
    """Velocity tendency ``dV/dt`` at every node.

    ``form="v2"`` uses ``L0 + psi``, ``P0 + chi``, ``kappa`` and the depth
    average of the body force; ``form="new"`` replaces ``P0 + chi`` by
    ``Sbar`` and the body force by its wall value.
    """
    V = state.V if isinstance(state, ShallowWaterState) else np.asarray(state)
    t = state.t if isinstance(state, ShallowWaterState) else None
    try:
        J00 = table.J[0, 0]
        L0, psi, kappa, H0, R0, Q0 = table.L0, table.psi, table.kappa, table.H[0], table.R0, table.Q0
        react_lin = table.Sbar if form == "new" else table.P0 + table.chi
    except AttributeError as exc:
        raise MissingCoefficient(str(exc)) from None
    if form not in ("v2", "new"):
        raise ConfigInvalid(f"unknown momentum form {form!r}", "form")
    X1, X2 = grid.mesh()
    fr = table.frame
    dV = np.stack([grad(V[0], grid), grad(V[1], grid)])  # dV[i, l]
    out = np.empty_like(V)
    gpi = bc.pi0.grad(X1, X2, t if t is not None else fr.t)
    F = depth_forcing(table, V, bc, rho0, body, integral=(form == "v2"))
    C0 = table.C0
    for i in range(2):
        adv = sum((V[l] - C0[l]) * dV[i, l] for l in range(2))
        react = sum(V[k] * (R0[i, k] + sum(H0[i, l, k] * V[l] for l in range(2))) for k in range(2))
        press = -sum(gpi[l] * J00[i, l] for l in range(2)) / rho0
        visc = sum(dV[k, l] * (L0[k, l, i] + psi[i, k, l]) for k in range(2) for l in range(2))
        visc = visc + sum(V[k] * react_lin[i, k] for k in range(2)) + kappa[i]
        if include_diffusion:
            HV = hessian(V[i], grid)
            visc = visc + sum(HV[l, m] * J00[l, m] for l in range(2) for m in range(2))
        out[i] = -adv - react + press + nu * visc + F[i] - Q0[i, 2] * fr.w
    return out


def diagnostic_pressure(table: CoefficientTable, bc: TractionBC, mu, X1, X2, t):
    """Leading wall pressure ``2 mu h_t / h + pi0``."""
    return 2.0 * mu * table.gap.ht / table.h + bc.pi0(X1, X2, t)


def pi1_consistency(state, table: CoefficientTable, grid: Grid2D, bc: TractionBC, mu, W=None):
    """Residual ``pi0 + mu div(sqrt(A0)(W-V))/sqrt(A0) + mu grad h.(W-V)/h - pi1``."""
    V = state.V
    W = V if W is None else np.asarray(W, float)
    X1, X2 = grid.mesh()
    Dv = W - V
    sq = table.sqrtA0
    div = (grad(sq * Dv[0], grid)[0] + grad(sq * Dv[1], grid)[1]) / sq
    slope = (table.dh[0] * Dv[0] + table.dh[1] * Dv[1]) / table.h
    return bc.pi0(X1, X2, state.t) + mu * div + mu * slope - bc.pi1(X1, X2, state.t)


class ShallowWaterModel:
    """Time integrator for the depth-averaged limit.

    Parameters
    ----------
    grid : Grid2D
    chart, gap_field : surface chart and gap law
    bc : TractionBC
    mu, rho0 : dynamic viscosity and density
    body : BodyForce, optional
    form : {"v2", "new"}
        Which coefficient grouping assembles the tendency.
    """

    def __init__(self, grid, chart, gap_field, bc: TractionBC, mu, rho0, body=None, N=3, form="v2"):
        if mu <= 0 or rho0 <= 0:
            raise ConfigInvalid("viscosity and density must be positive", "mu")
        self.grid, self.chart, self.gap_field, self.bc = grid, chart, gap_field, bc
        self.mu, self.rho0, self.nu = float(mu), float(rho0), float(mu) / float(rho0)
        self.body, self.N, self.form = body, int(N), form
        self.implicit = ImplicitDiffusion(grid, bc.edges)
        self._tables = {}

    def table(self, t):
        key = float(t)
        if key not in self._tables:
            if len(self._tables) > 4:
                self._tables.pop(next(iter(self._tables)))
            X1, X2 = self.grid.mesh()
            self._tables[key] = build_table(self.chart, self.gap_field, X1, X2, key, N=self.N)
        return self._tables[key]

    def initial_state(self, V0=None, t=0.0):
        X1, X2 = self.grid.mesh()
        V0 = make_velocity(V0) if V0 is not None else self.bc.inflow
        V = np.array(V0(X1, X2, t), float)
        return self._with_pressure(V, t)

    def _with_pressure(self, V, t):
        X1, X2 = self.grid.mesh()
        return ShallowWaterState(V=V, p0=diagnostic_pressure(self.table(t), self.bc, self.mu, X1, X2, t), t=t)

    def rhs(self, state, include_diffusion=True):
        return sw_rhs(state, self.table(state.t), self.grid, self.bc, self.nu, self.rho0, self.body,
                      self.form, include_diffusion)

    def step(self, state: ShallowWaterState, dt):
        """One IMEX step; the pressure is refreshed afterwards."""
        tb = self.table(state.t)
        check_cfl(dt, self.grid, state.V - tb.C0[:2])
        X1, X2 = self.grid.mesh()

        def explicit(V, t):
            return self.rhs(ShallowWaterState(V=V, p0=None, t=t), include_diffusion=False)

        def implicit(rhs, t_new):
            weight = self.table(t_new).J[0, 0, :2, :2]
            return self.implicit.solve(weight, self.nu, dt, rhs, self.bc.inflow(X1, X2, t_new))

        V = time_step_imex(state.V, state.t, dt, explicit, implicit)
        return self._with_pressure(V, state.t + dt)

    def run(self, state, dt, T, callback=None):
        n = int(round(T / dt))
        if n <= 0 or abs(n * dt - T) > 1e-9 * max(T, 1.0):
            raise ConfigInvalid("T must be a positive multiple of dt", "time")
        for _ in range(n):
            state = self.step(state, dt)
            if callback is not None:
                callback(state)
        return state


def write_state_csv(state: ShallowWaterState, grid: Grid2D, path):
    X1, X2 = grid.mesh()
    cols = np.column_stack([X1.ravel(), X2.ravel(), state.V[0].ravel(), state.V[1].ravel(), state.p0.ravel()])
    np.savetxt(path, cols, delimiter=",", header="xi1,xi2,V1,V2,p0", comments="", fmt="%.17g")


def write_series_json(series, path):
    with open(path, "w") as fh:
        json.dump(series, fh, indent=1, sort_keys=True)
