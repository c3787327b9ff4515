"""Thin-film pressure equation for prescribed wall velocities and its reconstruction.

The pressure unknown is the rescaled leading pressure ``p = eps**2 * pbar0``,
so the solve never needs a concrete film thickness ratio.  Both assemblies
below are written in flux form ``div(W grad p) = sqrt(A0) * rhs``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .coefficients import CoefficientTable, build_table
from .discretization import (
    Grid2D,
    LinearSystem,
    boundary_fluxes,
    check_spd,
    derivative4,
    dirichlet_system,
    divergence_matrix,
    grad,
    grad4,
    solve_sparse,
)
from .errors import ConfigInvalid
from .velocity import WallVelocity, make_velocity


@dataclass
class LubricationBC:
    """Wall velocities ``V`` (lower) and ``W`` (upper) and the pressure trace on the edge."""

    V: WallVelocity = None
    W: WallVelocity = None
    pressure: object = 0.0

    def __post_init__(self):
        self.V = make_velocity(self.V)
        self.W = make_velocity(self.W)

    def trace(self, X1, X2, t):
        p = self.pressure(X1, X2, t) if callable(self.pressure) else np.full(np.shape(X1), float(self.pressure))
        if not np.all(np.isfinite(p)):
            raise ConfigInvalid("pressure trace must be finite", "bc.pressure")
        return p


def _div_sqrtA0(table: CoefficientTable, vel: WallVelocity, X1, X2, t):
    """``div(sqrt(A0) U) / sqrt(A0)`` using analytic metric derivatives."""
    fr = table.frame
    U = vel(X1, X2, t)
    G = vel.grad(X1, X2, t)
    dE, dF, dG = fr.dforms[0], fr.dforms[1], fr.dforms[2]
    dA0 = dE * fr.G + fr.E * dG - 2.0 * fr.F * dF
    return G[0, 0] + G[1, 1] + (U[0] * dA0[0] + U[1] * dA0[1]) / (2.0 * fr.A0)


def reynolds_rhs(table: CoefficientTable, bc: LubricationBC, mu, X1, X2, t):
    """Right side of the pressure equation (before the sqrt(A0) flux scaling)."""
    fr, gap = table.frame, table.gap
    V, W = bc.V(X1, X2, t), bc.W(X1, X2, t)
    divs = _div_sqrtA0(table, bc.V, X1, X2, t) + _div_sqrtA0(table, bc.W, X1, X2, t)
    return (
        12.0 * mu * gap.ht
        + 12.0 * mu * gap.h * fr.A1 / fr.A0 * fr.w
        - 6.0 * mu * (gap.dh[0] * (W[0] - V[0]) + gap.dh[1] * (W[1] - V[1]))
        + 6.0 * mu * gap.h * divs
    )


def lubric_rhs(table: CoefficientTable, bc: LubricationBC, mu, X1, X2, t):
    """Same right side grouped as the depth-integrated mass balance times 12 mu."""
    fr, gap = table.frame, table.gap
    h = gap.h
    V, W = bc.V(X1, X2, t), bc.W(X1, X2, t)
    # div(sqrt(A0)(W+V)) from the product rule on the summed velocity
    UV = V + W
    GV = bc.V.grad(X1, X2, t) + bc.W.grad(X1, X2, t)
    dA0 = fr.dforms[0] * fr.G + fr.E * fr.dforms[2] - 2.0 * fr.F * fr.dforms[1]
    dsq = dA0 / (2.0 * table.sqrtA0)
    div_sum = table.sqrtA0 * (GV[0, 0] + GV[1, 1]) + UV[0] * dsq[0] + UV[1] * dsq[1]
    balance = (
        gap.ht
        + h * fr.w * fr.A1 / fr.A0
        + h / (2.0 * table.sqrtA0) * div_sum
        - 0.5 * (gap.dh[0] * (W[0] - V[0]) + gap.dh[1] * (W[1] - V[1]))
    )
    return 12.0 * mu * balance


def reynolds_weight(table: CoefficientTable, form="reynolds"):
    """Flux weight ``h^3 M / sqrt(A0)`` or, equivalently, ``h^3 sqrt(A0) J00``."""
    h3 = table.h**3
    if form == "reynolds":
        return h3 * table.frame.M / table.sqrtA0
    if form == "lubric":
        J00 = table.J[0, 0, :2, :2]
        W = h3 * table.sqrtA0 * J00
        return 0.5 * (W + np.swapaxes(W, 0, 1))
    raise ConfigInvalid(f"unknown assembly form {form!r}", "form")


def assemble_reynolds(grid: Grid2D, table: CoefficientTable, bc: LubricationBC, mu, t, form="reynolds"):
    """Sparse Dirichlet system for the rescaled pressure.

    Raises
    ------
    NonSPDWeight
        If the flux weight loses positive definiteness.
    """
    X1, X2 = grid.mesh()
    weight = reynolds_weight(table, form)
    check_spd(weight)
    rhs_fn = reynolds_rhs if form == "reynolds" else lubric_rhs
    rhs = table.sqrtA0 * rhs_fn(table, bc, mu, X1, X2, t)
    A = divergence_matrix(weight, grid)
    system = dirichlet_system(A, rhs, grid, bc.trace(X1, X2, t), symmetric=True)
    system.info.update(weight=weight, rhs_field=rhs, form=form)
    return system


@dataclass
class LubricationSolution:
    """Rescaled pressure and the wall data needed to rebuild the velocity."""

    grid: Grid2D
    t: float
    mu: float
    pressure: np.ndarray
    table: CoefficientTable
    bc: LubricationBC
    system: LinearSystem = None
    extra: dict = field(default_factory=dict)

    @property
    def mesh(self):
        return self.grid.mesh()

    @property
    def grad_pressure(self):
        return grad(self.pressure, self.grid)

    @property
    def u3(self):
        """Normal velocity, equal to the normal speed of the lower wall."""
        return self.table.frame.w

    def poiseuille(self):
        """``(h^2 / 2 mu) J00 grad p`` (the pressure-driven profile amplitude)."""
        J00 = self.table.J[0, 0, :2, :2]
        gp = self.grad_pressure
        return self.table.h**2 / (2.0 * self.mu) * np.einsum("il...,l...->i...", J00, gp)

    def velocity(self, x3):
        """Tangential components ``u_i`` at depth fraction ``x3`` (shape ``(2, n1, n2)``)."""
        X1, X2 = self.mesh
        V, W = self.bc.V(X1, X2, self.t), self.bc.W(X1, X2, self.t)
        return (x3**2 - x3) * self.poiseuille() + x3 * (W - V) + V

    def load(self):
        """Trapezoidal integral of the pressure over the unit square."""
        return float(np.trapezoid(np.trapezoid(self.pressure, dx=self.grid.d2, axis=1), dx=self.grid.d1))

    def compatibility_defect(self):
        """Interior right-side integral minus the net boundary flux (discrete divergence theorem)."""
        g = self.grid
        rhs = self.system.info["rhs_field"]
        total = rhs[1:-1, 1:-1].sum() * g.d1 * g.d2
        return float(total - boundary_fluxes(self.system.info["weight"], self.pressure, g))

    def to_csv(self, path):
        X1, X2 = self.mesh
        cols = [X1.ravel(), X2.ravel(), self.pressure.ravel()]
        names = ["xi1", "xi2", "p"]
        depths = (0.0, 0.25, 0.5, 0.75, 1.0)
        vel = [self.velocity(z) for z in depths]
        for i in range(2):
            for z, u in zip(depths, vel):
                cols.append(u[i].ravel())
                names.append(f"u{i + 1}_at_{z:g}")
        cols.append(self.u3.ravel())
        names.append("u3")
        np.savetxt(path, np.column_stack(cols), delimiter=",", header=",".join(names), comments="", fmt="%.17g")


def solve_lubrication(grid: Grid2D, chart, gap_field, bc: LubricationBC, mu, t, N=3, form="reynolds"):
    """Assemble and solve the pressure equation at time ``t``."""
    if mu <= 0.0:
        raise ConfigInvalid("viscosity must be positive", "mu")
    X1, X2 = grid.mesh()
    table = build_table(chart, gap_field, X1, X2, t, N=N)
    system = assemble_reynolds(grid, table, bc, mu, t, form=form)
    p = solve_sparse(system)
    return LubricationSolution(grid=grid, t=t, mu=mu, pressure=p, table=table, bc=bc, system=system)


class FullField:
    """Evaluator of velocity and pressure inside the film for a given ``eps``.

    Pressure corrections use the leading-order closed forms for the first
    and second depth coefficients; all fields are interpolated with cubic
    splines between grid nodes.
    """

    def __init__(self, sol: LubricationSolution, eps):
        if not 0.0 < eps <= 0.5:
            raise ConfigInvalid("eps must lie in (0, 0.5]", "eps")
        self.sol, self.eps = sol, float(eps)
        g, tb = sol.grid, sol.table
        X1, X2 = g.mesh()
        t = sol.t
        h, dh = tb.h, tb.dh
        V, W = sol.bc.V(X1, X2, t), sol.bc.W(X1, X2, t)
        u2 = sol.poiseuille()  # depth-quadratic coefficient
        u1 = W - V - u2  # depth-linear coefficient
        self.pbar0 = sol.pressure / self.eps**2
        sq = tb.sqrtA0
        d1 = lambda f: derivative4(f, g.d1, 0)
        d2 = lambda f: derivative4(f, g.d2, 1)
        div_sq = lambda U: (d1(sq * U[0]) + d2(sq * U[1])) / sq
        self.pbar1 = sol.mu * (-div_sq(u1) + (dh[0] * u1[0] + dh[1] * u1[1]) / h)
        # normal coefficients of the wall-driven and shear parts
        fr = tb.frame
        u0 = np.stack([V[0], V[1], fr.w])
        du0 = np.stack([grad4(V[0], g), grad4(V[1], g), fr.dw])
        u31 = -self.eps * h * (div_sq(V) + fr.w * fr.A1 / fr.A0)
        B1, H1 = tb.B[1], tb.H[1]
        tail = sum(du0[k, l] * B1[l, k] for l in range(2) for k in range(2))
        tail = tail + sum(u0[k] * H1[l, l, k] for l in range(2) for k in range(3))
        u32 = (
            -self.eps * h / 2.0 * div_sq(u1)
            + self.eps / 2.0 * (dh[0] * u1[0] + dh[1] * u1[1])
            - self.eps * h * u31 * fr.A1 / fr.A0
            - (self.eps * h) ** 2 / 2.0 * tail
        )
        H0 = tb.H[0]
        u2full = np.stack([u2[0], u2[1], u32])
        trace = sum(u2full[k] * H0[l, l, k] for k in range(3) for l in range(2))
        self.pbar2 = -sol.mu * (d1(u2[0]) + d2(u2[1]) + trace - 2.0 / h * (u2[0] * dh[0] + u2[1] * dh[1]))
        self.u1, self.u2, self.u31, self.u32 = u1, u2, u31, u32
        self._V, self._W = V, W
        axes = (g.x1, g.x2)
        fields = {"p0": self.pbar0, "p1": self.pbar1, "p2": self.pbar2, "w": fr.w}
        for i in range(2):
            fields[f"V{i}"], fields[f"W{i}"], fields[f"q{i}"] = V[i], W[i], u2[i]
        self._interp = {k: RegularGridInterpolator(axes, v, method="cubic") for k, v in fields.items()}

    def __call__(self, x1, x2, x3):
        """Return ``(u, p)`` with ``u`` of shape ``(3, *S)`` (components on a1, a2, a3)."""
        x1, x2, x3 = np.broadcast_arrays(*(np.asarray(v, float) for v in (x1, x2, x3)))
        pts = np.stack([x1.ravel(), x2.ravel()], axis=-1)
        at = lambda k: self._interp[k](pts).reshape(x1.shape)
        z = x3
        u = np.empty((3,) + x1.shape)
        for i in range(2):
            V, W = at(f"V{i}"), at(f"W{i}")
            u[i] = (z**2 - z) * at(f"q{i}") + z * (W - V) + V
        u[2] = at("w")
        p = at("p0") + z * at("p1") + z**2 * at("p2")
        return u, p


def full_field_reconstruction(sol: LubricationSolution, eps) -> FullField:
    return FullField(sol, eps)


@dataclass
class SliderTrace:
    """Edge pressure equal to the one-dimensional slider solution along xi1."""

    h0: float
    g1: float
    mu: float = 1.0
    U: float = 1.0

    def __call__(self, X1, X2, t):
        return slider_pressure(X1, self.h0, self.g1, self.mu, self.U)[0]


def slider_pressure(x, h0, g1, mu=1.0, U=1.0):
    """Closed-form pressure of the plane slider with gap ``h0 + g1 x`` and ``p(0) = p(1) = 0``.

    Returns ``(p, x_peak, p_peak, load)``.
    """
    x = np.asarray(x, float)
    h = h0 + g1 * x
    h1 = h0 + g1
    if g1 == 0.0:
        return np.zeros_like(x), 0.5, 0.0, 0.0
    F2 = lambda hh: (1.0 / h0 - 1.0 / hh) / g1  # int_0^x h^-2
    F3 = lambda hh: (1.0 / h0**2 - 1.0 / hh**2) / (2.0 * g1)  # int_0^x h^-3
    ratio = F2(h1) / F3(h1)
    p = 6.0 * mu * U * (F2(h) - ratio * F3(h))
    h_star = ratio
    x_star = (h_star - h0) / g1
    p_star = 6.0 * mu * U * (F2(h_star) - ratio * F3(h_star))
    # int_0^1 F2 and F3 in closed form
    L = np.log(h1 / h0)
    iF2 = (1.0 / h0 - L / g1) / g1
    iF3 = (1.0 / h0**2 + (1.0 / h1 - 1.0 / h0) / g1) / (2.0 * g1)
    load = 6.0 * mu * U * (iF2 - ratio * iF3)
    return p, float(x_star), float(p_star), float(load)
