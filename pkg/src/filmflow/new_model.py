"""Cubic-in-depth film model: residual kernels, vertical elimination and time advance.

Velocity components on (a1, a2, a3) and the pressure are cubic polynomials
in the normalised depth coordinate ``xi3``; the unknowns are their
coefficients ``u[n, k]`` (order ``n = 0..3``, component ``k = 0, 1, 2``)
and ``p[n]``.  The first group of equations (tangential momentum at every
order plus the top-order continuity balance) evolves the tangential
coefficients; the second group (lower-order continuity and normal
momentum) fixes the normal velocity coefficients and the higher pressure
coefficients.

The pointwise kernels below act on :class:`FieldJets`, so they can be
evaluated on a grid or at scattered points with exact derivatives.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .coefficients import CoefficientTable, build_table
from .discretization import (
    Grid2D,
    ImplicitDiffusion,
    _second_along,
    check_cfl,
    derivative,
    dirichlet_system,
    divergence_matrix,
    grad,
    grad4,
    hessian,
    nonconservative_matrix,
    solve_sparse,
    time_step_imex,
)
from .errors import ConfigInvalid, EpsilonTooSmall, MissingFriction, NonPositiveGap
from .forces import BodyForce, QuadraticFriction
from .geometry import dot
from .lubrication import LubricationBC, reynolds_weight
from .shallow_water import TractionBC
from .velocity import make_velocity

EPS_MIN = 1e-4


@dataclass
class FieldJets:
    """Polynomial coefficients and their derivatives at a set of points.

    Attributes
    ----------
    u : (4, 3, *S)
        ``u[n, k]`` coefficient of ``xi3**n`` of the ``k``-th velocity component.
    du, ddu : (4, 3, 2, *S), (4, 3, 2, 2, *S)
        First and second surface derivatives.
    ut : (4, 3, *S)
        Time derivative at fixed reference coordinates.
    p : (4, *S)
    dp : (4, 2, *S)
    """

    u: np.ndarray
    du: np.ndarray
    ddu: np.ndarray
    ut: np.ndarray
    p: np.ndarray
    dp: np.ndarray

    @classmethod
    def zeros(cls, shape):
        z = lambda *lead: np.zeros(lead + tuple(shape))
        return cls(u=z(4, 3), du=z(4, 3, 2), ddu=z(4, 3, 2, 2), ut=z(4, 3), p=z(4), dp=z(4, 2))


def _check_eps(eps):
    if not eps >= EPS_MIN:
        raise EpsilonTooSmall(f"film ratio {eps!r} below {EPS_MIN:g}; the 1/eps^2 terms are unreliable")


class _Kernel:
    """Shared contractions for one table and one film ratio."""

    def __init__(self, jets: FieldJets, table: CoefficientTable, eps, nu, rho0, body=None):
        _check_eps(eps)
        self.j, self.T, self.eps, self.nu, self.rho0 = jets, table, float(eps), float(nu), float(rho0)
        self.h, self.dh = table.h, table.dh
        self.eh = self.eps * self.h
        fr = table.frame
        self.w = fr.w
        self.ht = table.gap.ht
        self.Hx = table.first_proj  # [i, l, k]
        self.B = table.B
        self.C = [table.C0] + [table.Cij(n, n - 1) for n in range(1, 4)]
        if body is None:
            self.f = np.zeros((4, 3) + table.shape)
        else:
            self.f = np.asarray(body.coefficients(table), float)

    # --- building blocks -------------------------------------------------
    def cov_grad(self, d, i, l):
        """du[d, i, l] + sum_k u[d, k] Hx[i, l, k]."""
        u, du = self.j.u, self.j.du
        return du[d, i, l] + sum(u[d, k] * self.Hx[i, l, k] for k in range(3))

    def pressure(self, n, i):
        """Pressure-gradient term of order ``n`` in component ``i`` (divided by rho0, sign included)."""
        p, dp, J, eh, h = self.j.p, self.j.dp, self.T.J, self.eh, self.h
        if i == 2:
            if n + 1 > 3:
                return 0.0
            return -(n + 1) * p[n + 1] / (self.rho0 * eh)
        val = sum(eh**r * sum(dp[n - r, l] * J[0, r, i, l] for l in range(2)) for r in range(n + 1))
        val = val + sum(eh**r * (n - r) * p[n - r] * J[0, r, i, 2] for r in range(n)) / h
        return -val / self.rho0

    def viscous_block(self, d, i, lap_w, L, S):
        """sum ddu[d, i] : lap_w + sum du[d, k, l] L[k, l, i] + sum u[d, k] S[i, k]."""
        u, du, ddu = self.j.u, self.j.du, self.j.ddu
        val = sum(ddu[d, i, l, m] * lap_w[l, m] for l in range(2) for m in range(2))
        val = val + sum(du[d, k, l] * L[k, l, i] for k in range(3) for l in range(2))
        return val + sum(u[d, k] * S[i, k] for k in range(3))


def momentum_residuals(jets: FieldJets, table: CoefficientTable, eps, nu, rho0, body=None, normal=True,
                       orders=(0, 1, 2, 3)):
    """Residuals (left minus right side) of the momentum balance by depth power.

    Returns an array ``(4, 3, *S)``: entry ``[n, i]`` is the ``xi3**n``
    balance projected on the dual vector ``a^i`` (i = 0, 1) or on the unit
    normal (i = 2).  The normal balance is only formed for ``n <= 2``; the
    ``[3, 2]`` entry is left at zero.
    """
    K = _Kernel(jets, table, eps, nu, rho0, body)
    T, e, eh, h, dh = table, K.eps, K.eh, K.h, K.dh
    u, du, ddu, ut = jets.u, jets.du, jets.ddu, jets.ut
    C0, C10, C21, C32 = K.C
    Q0, Hx, B, w, ht = T.Q0, K.Hx, T.B, K.w, K.ht
    J00 = T.J[0, 0, :2, :2]
    J10 = T.J[1, 0, :2, :2]
    ratio = T.frame.A1 / T.frame.A0
    trH3 = T.H[0, 0, 0, 2] + T.H[0, 1, 1, 2]
    hgrad = lambda d: sum(u[d, l] * dh[l] for l in range(2))
    out = np.zeros((4, 3) + T.shape)
    comps = (0, 1, 2) if normal else (0, 1)

    L = {
        0: T.L0, 1: T.L10, 2: T.L20, 3: T.L30,
        (0, 1): T.L01, (1, 1): T.L11, (0, 2): T.L02, (2, 1): T.L21, (1, 2): T.L12, (0, 3): T.L03,
    }
    S = {
        0: T.S0, 1: T.S10, 2: T.S20, 3: T.S30,
        (0, 1): T.S01, (1, 1): T.S11, (0, 2): T.S02, (2, 1): T.S21, (1, 2): T.S12, (0, 3): T.S03,
    }

    def advect(n, i):
        return ut[n, i] + sum(du[n, i, l] * (u[0, l] - C0[l]) for l in range(2)) + sum(
            u[n, k] * (Q0[i, k] + sum(u[0, l] * Hx[i, l, k] for l in range(2))) for k in range(3)
        )

    for i in comps:
        G0 = [K.cov_grad(0, i, l) for l in range(2)]
        G1 = [K.cov_grad(1, i, l) for l in range(2)]
        # ---- xi3^0
        if 0 in orders:
            lhs = advect(0, i) + u[1, i] * (u[0, 2] - w) / eh
            visc = K.viscous_block(0, i, J00, L[0], S[0]) + ratio * u[1, i] / eh + 2.0 * u[2, i] / eh**2
            out[0, i] = lhs - (K.pressure(0, i) + K.nu * visc + K.f[0, i])

        # ---- xi3^1
        if 1 in orders:
            lhs = advect(1, i)
            lhs = lhs + sum(u[1, l] * G0[l] for l in range(2))
            lhs = lhs - u[1, i] * (ht + C0[2] + hgrad(0)) / h
            lhs = lhs + eh * sum(G0[l] * (sum(B[1, l, m] * u[0, m] for m in range(2)) - C10[l]) for l in range(2))
            lhs = lhs + 2.0 * u[2, i] * (u[0, 2] - w) / eh + u[1, i] * u[1, 2] / eh
            visc = K.viscous_block(1, i, J00, L[1], S[1])
            visc = visc + e * K.viscous_block(0, i, 2.0 * h * J10, L[(0, 1)], S[(0, 1)])
            visc = visc + 2.0 * ratio * u[2, i] / eh + 6.0 * u[3, i] / eh**2
            out[1, i] = lhs - (K.pressure(1, i) + K.nu * visc + K.f[1, i])

        # ---- xi3^2
        if 2 in orders:
            T1 = [u[1, l] - eh * C10[l] + eh * sum(u[0, m] * B[1, l, m] for m in range(2)) for l in range(3)]
            lhs = advect(2, i)
            lhs = lhs + 2.0 / h * u[2, i] * (u[1, 2] / e - hgrad(0) - ht - C0[2]) + u[2, 2] * u[1, i] / eh
            lhs = lhs + sum(
                G0[l]
                * (
                    u[2, l]
                    + eh * sum(u[1, m] * B[1, l, m] for m in range(2))
                    + eh**2 * (sum(u[0, m] * B[2, l, m] for m in range(2)) - C21[l])
                )
                for l in range(2)
            )
            lhs = lhs + sum(G1[l] * T1[l] for l in range(2))
            lhs = lhs + u[1, i] * (e * sum(u[0, l] * B[1, 2, l] for l in range(2)) - e * C10[2] - hgrad(1) / h)
            lhs = lhs + 3.0 * u[3, i] * (u[0, 2] - w) / eh
            visc = 3.0 * u[3, i] * trH3 / eh + K.viscous_block(2, i, J00, L[2], S[2])
            visc = visc + e * K.viscous_block(1, i, 2.0 * h * J10, L[(1, 1)], S[(1, 1)])
            visc = visc + e**2 * K.viscous_block(0, i, T.iota21, L[(0, 2)], S[(0, 2)])
            out[2, i] = lhs - (K.pressure(2, i) + K.nu * visc + K.f[2, i])

    if 3 in orders:
        for i in (0, 1):
            G0 = [K.cov_grad(0, i, l) for l in range(2)]
            G1 = [K.cov_grad(1, i, l) for l in range(2)]
            T1 = [u[1, l] - eh * C10[l] + eh * sum(u[0, m] * B[1, l, m] for m in range(2)) for l in range(3)]
            # ---- xi3^3 (tangential only)
            lhs = ut[3, i] + sum(du[3, i, l] * (u[0, l] - C0[l]) for l in range(2))
            lhs = lhs + sum(u[3, k] * (Q0[i, k] + sum(Hx[i, l, k] * u[0, l] for l in range(2))) for k in range(3))
            lhs = lhs + sum(u[3, k] * G0[k] for k in range(2))
            lhs = lhs + 3.0 / h * u[3, i] * (u[1, 2] / e - ht - C0[2] - hgrad(0)) + u[3, 2] * u[1, i] / eh
            lhs = lhs + sum(du[2, i, l] * T1[l] for l in range(2))
            lhs = lhs + sum(u[2, k] * sum(Hx[i, l, k] * T1[l] for l in range(2)) for k in range(3))
            lhs = lhs + sum(
                u[2, k]
                * (
                    du[1, i, k]
                    - dh[k] * u[1, i] / h
                    + sum(u[1, m] * Hx[i, k, m] for m in range(3))
                    + eh * sum(G0[l] * B[1, l, k] for l in range(2))
                )
                for k in range(2)
            )
            lhs = lhs + 2.0 * u[2, i] * (
                u[2, 2] / eh - hgrad(1) / h - e * C10[2] + e * sum(u[0, k] * B[1, 2, k] for k in range(2))
            )
            lhs = lhs + eh * sum(
                G1[l]
                * (sum(u[1, m] * B[1, l, m] + eh * u[0, m] * B[2, l, m] for m in range(2)) - eh * C21[l])
                for l in range(2)
            )
            lhs = lhs + e * u[1, i] * (
                sum(u[1, k] * B[1, 2, k] + eh * u[0, k] * B[2, 2, k] for k in range(2)) - eh * C21[2]
            )
            lhs = lhs + eh**2 * sum(u[1, k] * sum(G0[l] * B[2, l, k] for l in range(2)) for k in range(2))
            lhs = lhs + eh**3 * sum(
                G0[l] * (sum(u[0, m] * B[3, l, m] for m in range(2)) - C32[l]) for l in range(2)
            )
            visc = K.viscous_block(3, i, J00, L[3], S[3])
            visc = visc + e * K.viscous_block(2, i, 2.0 * h * J10, L[(2, 1)], S[(2, 1)])
            visc = visc + e**2 * K.viscous_block(1, i, T.iota21, L[(1, 2)], S[(1, 2)])
            visc = visc + e**3 * K.viscous_block(0, i, T.iota3, L[(0, 3)], S[(0, 3)])
            out[3, i] = lhs - (K.pressure(3, i) + K.nu * visc + K.f[3, i])
    return out


def _trace_H(table, j):
    """``trH[k] = sum_l H^j[l, l, k]`` for k = 0, 1, 2."""
    H = table.H[j]
    return np.stack([H[0, 0, k] + H[1, 1, k] for k in range(3)])


def continuity_coefficients(jets: FieldJets, table: CoefficientTable, eps, orders=(0, 1, 2, 3)):
    """``xi3**n`` coefficients (n = 0..3) of the divergence of the velocity.

    The normal coefficient ``u[n+1, 2]`` enters through ``(n+1) u[n+1, 2]
    / (eps h)``; for ``n = 3`` that term is absent (cubic profile).  Orders
    not listed in ``orders`` are returned as zero.
    """
    _check_eps(eps)
    u, du, h, dh = jets.u, jets.du, table.h, table.dh
    eh = eps * h
    B = table.B
    trH = [_trace_H(table, j) for j in range(4)]
    out = np.zeros((4,) + table.shape)
    for n in orders:
        for r in range(n + 1):
            d = n - r
            val = sum(du[d, k, l] * B[r, l, k] for l in range(2) for k in range(2))
            val = val + sum(u[d, k] * trH[r][k] for k in range(3))
            if d >= 1:
                val = val + d / h * sum(u[d, k] * B[r, 2, k] for k in range(2))
            out[n] += eh**r * val
        if n < 3:
            out[n] += (n + 1) * u[n + 1, 2] / eh
    return out


def continuity_residual(jets, table, eps):
    """Top-order continuity balance, the ninth first-group equation."""
    return continuity_coefficients(jets, table, eps, orders=(3,))[3]


# ------------------------------------------------------------------ grid level
@dataclass
class FieldStack:
    """Model state on a grid.

    Attributes
    ----------
    eps, t : float
        Film ratio and time.
    u : (4, 2, n1, n2)
        Tangential coefficients ``u[n, i]`` (the primary unknowns).
    p0 : (n1, n2)
        Leading pressure coefficient.
    u3 : (4, n1, n2)
        Normal coefficients, derived by :func:`eliminate_vertical`.
    p : (4, n1, n2)
        All pressure coefficients; ``p[0]`` mirrors ``p0``, the rest are derived.
    ut : (4, 2, n1, n2)
        Time derivative of ``u`` (zero for steady states).
    """

    eps: float
    t: float
    u: np.ndarray
    p0: np.ndarray
    u3: np.ndarray = None
    p: np.ndarray = None
    ut: np.ndarray = None

    def __post_init__(self):
        _check_eps(self.eps)
        self.u = np.asarray(self.u, float)
        shape = self.u.shape[2:]
        if self.u.shape[:2] != (4, 2):
            raise ConfigInvalid(f"tangential coefficients need shape (4, 2, n1, n2), got {self.u.shape}", "u")
        self.p0 = np.broadcast_to(np.asarray(self.p0, float), shape).copy()
        if self.u3 is None:
            self.u3 = np.zeros((4,) + shape)
        if self.p is None:
            self.p = np.zeros((4,) + shape)
        self.p[0] = self.p0
        if self.ut is None:
            self.ut = np.zeros_like(self.u)

    @classmethod
    def from_surface_velocity(cls, eps, t, u0, p0=0.0):
        u0 = np.asarray(u0, float)
        u = np.zeros((4,) + u0.shape)
        u[0] = u0
        return cls(eps=eps, t=t, u=u, p0=p0)

    @property
    def shape(self):
        return self.u.shape[2:]


def _stack_grad(f, grid: Grid2D):
    """Gradient over the trailing grid axes; the derivative index goes just before them."""
    return np.stack([derivative(f, grid, -2), derivative(f, grid, -1)], axis=-3)


def _stack_hessian(f, grid: Grid2D):
    out = np.empty(np.shape(f)[:-2] + (2, 2) + grid.shape)
    out[..., 0, 0, :, :] = _second_along(f, grid.d1, -2)
    out[..., 1, 1, :, :] = _second_along(f, grid.d2, -1)
    out[..., 0, 1, :, :] = out[..., 1, 0, :, :] = derivative(derivative(f, grid, -2), grid, -1)
    return out


def grid_jets(stack: FieldStack, grid: Grid2D, table: CoefficientTable) -> FieldJets:
    """Finite-difference jets of a stack; ``u3[0]`` uses the exact surface speed."""
    fr = table.frame
    j = FieldJets.zeros(stack.shape)
    j.u[:, :2] = stack.u
    j.u[:, 2] = stack.u3
    j.u[0, 2] = fr.w
    j.du = _stack_grad(j.u, grid)
    j.ddu = _stack_hessian(j.u, grid)
    j.du[0, 2], j.ddu[0, 2] = fr.dw, fr.ddw
    j.dp = _stack_grad(stack.p, grid)
    j.ut[:, :2] = stack.ut
    j.ut[0, 2] = fr.w_t
    j.p = stack.p.copy()
    return j


def _fill_normal(jets: FieldJets, table, eps):
    """Solve the continuity orders 0..2 in turn for ``u[1..3, 2]`` (values only)."""
    eh = eps * table.h
    for n in range(3):
        jets.u[n + 1, 2] = 0.0
        c = continuity_coefficients(jets, table, eps, orders=(n,))[n]
        jets.u[n + 1, 2] = -eh * c / (n + 1)
    return jets.u[1:, 2]


def _hdiv(du, u, table, k_max=3):
    """``sum_k du_k/dxi_k + sum_{k,l} u_k H0_llk`` (surface divergence of a coefficient)."""
    trH = _trace_H(table, 0)
    return du[0, 0] + du[1, 1] + sum(u[k] * trH[k] for k in range(k_max))


def _check_gap(table):
    if np.any(~(table.h > 0.0)):
        raise NonPositiveGap(f"gap minimum {float(np.min(table.h)):.6g} is not positive")


def eliminate_vertical(stack: FieldStack, grid: Grid2D, table: CoefficientTable, mu, rho0, body=None,
                       p1_mode="full"):
    """Recompute ``u3[1..3]`` and ``p[1..3]`` from the tangential coefficients and ``p0``.

    ``p1_mode="full"`` takes ``p[1]`` from the complete normal balance at
    the wall; ``"leading"`` keeps only its O(1) part.  The higher pressure
    coefficients use their leading-order expressions.  The result depends
    only on ``stack.u`` and ``stack.p0``, so repeating the call is a no-op.

    Raises
    ------
    NonPositiveGap
    """
    _check_gap(table)
    eps = stack.eps
    if p1_mode not in ("full", "leading"):
        raise ConfigInvalid(f"unknown p1 mode {p1_mode!r}", "p1_mode")
    out = replace(stack, u3=np.zeros((4,) + stack.shape), p=np.zeros((4,) + stack.shape))
    out.p[0] = stack.p0
    jets = grid_jets(out, grid, table)
    out.u3[0] = table.frame.w
    out.u3[1:] = _fill_normal(jets, table, eps)
    jets = grid_jets(out, grid, table)
    u, du = jets.u, jets.du
    h, dh, eh = table.h, table.dh, eps * table.h
    nu = mu / rho0

    if p1_mode == "full":
        R = momentum_residuals(jets, table, eps, nu, rho0, body, normal=True, orders=(0,))[0, 2]
        out.p[1] = -rho0 * eh * R
    else:
        sq = table.sqrtA0
        div1 = (grad(sq * u[1, 0], grid)[0] + grad(sq * u[1, 1], grid)[1]) / sq
        out.p[1] = mu * (-div1 + (dh[0] * u[1, 0] + dh[1] * u[1, 1]) / h)

    div2 = _hdiv(du[2], u[2], table) - 2.0 / h * (u[2, 0] * dh[0] + u[2, 1] * dh[1])
    out.p[2] = -mu * div2

    n3, Q0 = table.normal_proj, table.Q0
    f = body.coefficients(table) if body is not None else np.zeros((4, 3) + table.shape)
    trH3 = _trace_H(table, 0)[2]
    inertia = sum(
        u[2, k] * (Q0[2, k] + du[0, 2, k] + sum(u[0, l] * (n3[l, k] + n3[k, l]) for l in range(2)))
        for k in range(2)
    ) + sum(u[1, l] * sum(u[1, k] * n3[l, k] for k in range(2)) for l in range(2))
    L20, S20 = table.L20, table.S20
    visc = -div2 * trH3 + sum(du[2, k, l] * L20[k, l, 2] for k in range(2) for l in range(2))
    visc = visc + sum(u[2, k] * S20[2, k] for k in range(2))
    out.p[3] = -eh * rho0 / 3.0 * inertia + eh * mu / 3.0 * visc + eh * rho0 / 3.0 * f[2, 2]
    return out


def residual_group1(stack: FieldStack, grid: Grid2D, table: CoefficientTable, mu, rho0, body=None):
    """Nine first-group residual fields, shape ``(9, n1, n2)``.

    Rows: tangential momentum at orders 0, 1, 2, 3 (two components each),
    then the top-order continuity balance.

    Raises
    ------
    EpsilonTooSmall
    """
    _check_eps(stack.eps)
    jets = grid_jets(stack, grid, table)
    R = momentum_residuals(jets, table, stack.eps, mu / rho0, rho0, body, normal=False)
    rows = [R[n, i] for n in range(4) for i in range(2)]
    rows.append(continuity_residual(jets, table, stack.eps))
    return np.stack(rows)


RESIDUAL_NAMES = ("mom0_1", "mom0_2", "mom1_1", "mom1_2", "mom2_1", "mom2_2", "mom3_1", "mom3_2", "cont3")


def closure_defect(stack: FieldStack, table: CoefficientTable):
    """Normal-velocity mismatch at the upper wall, ``sum_{k>=1} u3[k] - eps dh/dt``."""
    return stack.u3[1] + stack.u3[2] + stack.u3[3] - stack.eps * table.gap.ht


def interior_max(field, grid: Grid2D):
    a = np.asarray(field)
    return float(np.max(np.abs(a[..., 1:-1, 1:-1]))) if grid.shape[0] > 2 else float(np.max(np.abs(a)))


# --------------------------------------------------------- velocity regime
def pressure_flux_maps(table: CoefficientTable, eps, mu, rho0, grid: Grid2D):
    """Fields ``E2, E3`` with ``u[2] = E2 grad p0`` and ``u[3] = E3 grad p0`` and their gradients."""
    h, ratio = table.h, table.frame.A1 / table.frame.A0
    E2 = (eps * h) ** 2 / (2.0 * mu) * table.J[0, 0, :2, :2]
    E3 = -(eps * h / 3.0) * ratio * E2 - eps**3 * h / rho0 * table.J[0, 1, :2, :2]
    return E2, E3, grad4(E2, grid), grad4(E3, grid)


def apply_bc_velocity(stack: FieldStack, V, W, grid: Grid2D, table: CoefficientTable, mu, rho0, body=None,
                      p1_mode="full"):
    """Impose the wall velocities given the current ``p0``.

    ``u[0] = V``; ``u[2]`` and ``u[3]`` follow from the pressure gradient;
    ``u[1] = W - V - u[2] - u[3]``.  The upper-wall normal velocity is left
    as a diagnostic (:func:`closure_defect`).
    """
    X1, X2 = grid.mesh()
    V, W = make_velocity(V), make_velocity(W)
    E2, E3, _, _ = pressure_flux_maps(table, stack.eps, mu, rho0, grid)
    gp = grad(stack.p0, grid)
    u = np.zeros_like(stack.u)
    u[0] = V(X1, X2, stack.t)
    u[2] = np.einsum("il...,l...->i...", E2, gp)
    u[3] = np.einsum("il...,l...->i...", E3, gp)
    u[1] = W(X1, X2, stack.t) - u[0] - u[2] - u[3]
    new = replace(stack, u=u, p0=stack.p0.copy(), u3=None, p=None)
    return eliminate_vertical(new, grid, table, mu, rho0, body, p1_mode)


def _closure_functional(table, eps, grid, bc: LubricationBC, t, E2, E3, dE2, dE3):
    """Pointwise map ``(grad p0, hess p0) -> sum_{k>=1} u3[k] - eps h_t`` (affine)."""
    X1, X2 = grid.mesh()
    Vv, Wv = bc.V(X1, X2, t), bc.W(X1, X2, t)
    dV, dW = bc.V.grad(X1, X2, t), bc.W.grad(X1, X2, t)
    fr = table.frame

    def F(dP, ddP):
        j = FieldJets.zeros(table.shape)
        j.u[0, :2], j.du[0, :2] = Vv, dV
        j.u[0, 2], j.du[0, 2] = fr.w, fr.dw
        for n, E, dE in ((2, E2, dE2), (3, E3, dE3)):
            j.u[n, :2] = np.einsum("il...,l...->i...", E, dP)
            j.du[n, :2] = np.einsum("mil...,l...->im...", dE, dP) + np.einsum("il...,lm...->im...", E, ddP)
        j.u[1, :2] = Wv - Vv - j.u[2, :2] - j.u[3, :2]
        j.du[1, :2] = dW - dV - j.du[2, :2] - j.du[3, :2]
        u3 = _fill_normal(j, table, eps)
        return u3.sum(axis=0) - eps * table.gap.ht

    return F


def solve_velocity_pressure(grid: Grid2D, table: CoefficientTable, bc: LubricationBC, eps, mu, rho0, t):
    """Leading pressure ``p0`` making the upper-wall normal velocity match the gap motion.

    The closure is affine in ``p0``; its coefficients are read off pointwise
    and the resulting second-order equation is solved for ``q = eps**2 p0``
    with ``q`` equal to the prescribed trace on the edge.  The principal part
    is assembled in flux form; the remaining terms use a nine-point stencil.
    """
    E2, E3, dE2, dE3 = pressure_flux_maps(table, eps, mu, rho0, grid)
    F = _closure_functional(table, eps, grid, bc, t, E2, E3, dE2, dE3)
    S = table.shape
    z1, z2 = np.zeros((2,) + S), np.zeros((2, 2) + S)
    c = F(z1, z2)
    b = np.empty((2,) + S)
    a = np.empty((2, 2) + S)
    for l in range(2):
        e = z1.copy()
        e[l] = 1.0
        b[l] = F(e, z2) - c
        m = z2.copy()
        m[l, l] = 1.0
        a[l, l] = F(z1, m) - c
    m = z2.copy()
    m[0, 1] = m[1, 0] = 1.0
    a[0, 1] = a[1, 0] = 0.5 * (F(z1, m) - c)
    scale = 12.0 * mu * table.sqrtA0 / eps
    Wt = reynolds_weight(table, "lubric")
    dWt = grad4(Wt, grid)
    b0 = np.stack([dWt[0, 0, m] + dWt[1, 1, m] for m in range(2)])
    A = divergence_matrix(Wt, grid) + nonconservative_matrix(scale * a / eps**2 - Wt, scale * b / eps**2 - b0, grid)
    X1, X2 = grid.mesh()
    system = dirichlet_system(A, -scale * c, grid, bc.trace(X1, X2, t), symmetric=False)
    q = solve_sparse(system)
    return q / eps**2


# --------------------------------------------------------- traction regime
def _friction_vector(bc: TractionBC, table, tangential, normal, rho0):
    law = getattr(bc, "friction_law", None)
    if law is None or not np.isfinite(getattr(law, "coefficient", np.nan)):
        raise MissingFriction("the traction regime needs a finite friction coefficient")
    return law(QuadraticFriction.wall_vector(table.frame, tangential, normal), rho0)


def _dual_dot(table, vec, i):
    a = table.frame.a
    return table.alpha[0, i] * dot(vec, a[0]) + table.beta[0, i] * dot(vec, a[1])


def traction_first_order(u0, grid, table, bc: TractionBC, eps, mu, rho0):
    """``u[1]`` from the tangential traction at the lower wall."""
    fr = table.frame
    D0 = table.D[0]
    f0 = _friction_vector(bc, table, u0, fr.w, rho0)
    out = np.empty_like(u0)
    for i in range(2):
        val = sum(u0[k] * D0[i, k] for k in range(2))
        val = val + table.alpha[0, i] * fr.dw[0] + table.beta[0, i] * fr.dw[1]
        val = val + bc.s0 * eps / mu * _dual_dot(table, f0, i)
        out[i] = -eps * table.h * val
    return out, f0


def traction_second_order(u0, grid, table, bc: TractionBC, eps, mu, f0, f1):
    """``u[2]`` from the tangential traction at both walls (walls moving with ``u0``)."""
    fr, gap = table.frame, table.gap
    h, dh, J00, H0 = table.h, table.dh, table.J[0, 0], table.H[0]
    da, eta, sq = fr.da, table.eta, table.sqrtA0
    dV = np.stack([grad(u0[0], grid), grad(u0[1], grid)])  # dV[k, l]
    out = np.empty_like(u0)
    for i in range(2):
        al, be = table.alpha[0, i], table.beta[0, i]
        val = sum(
            -J00[2, l] * dV[i, l]
            + J00[l, i] * sum(dV[k, l] * dh[k] for k in range(2))
            - J00[2, l] * sum(u0[k] * H0[i, l, k] for k in range(2))
            for l in range(2)
        )
        val = val + sum(
            u0[k] * (h * table.I * table.D[0, i, k] - al * dot(da[k, 0], eta) - be * dot(da[k, 1], eta))
            for k in range(2)
        ) / sq
        val = val + J00[2, i] * gap.ht / h - sum(J00[k, i] * gap.dht[k] for k in range(2))
        val = val - fr.w * sum(J00[2, l] * H0[i, l, 2] + J00[l, i] / sq * dot(da[2, l], eta) for l in range(2))
        fric = bc.s0 / mu * _dual_dot(table, f0 + f1, i)
        out[i] = eps**2 * h / 2.0 * (val + fric)
    return out


def apply_bc_traction(stack: FieldStack, bc: TractionBC, grid: Grid2D, table: CoefficientTable, mu, rho0,
                      body=None, p1_mode="full", friction_passes=3):
    """Close the stack from ``u[0]`` when both walls carry prescribed normal tractions.

    ``p0`` follows the normal traction balance, ``u[1]`` and ``u[2]`` the
    tangential ones, and ``u[3]`` the first-order momentum balance.  The
    upper-wall friction depends on the closed profile, so it is refreshed
    ``friction_passes`` times.

    Raises
    ------
    MissingFriction
        If the friction law is absent or not finite.
    """
    eps, t = stack.eps, stack.t
    X1, X2 = grid.mesh()
    u0 = stack.u[0].copy()
    fr = table.frame
    base = replace(stack, u=np.concatenate([u0[None], np.zeros((3,) + u0.shape)]), u3=None, p=None)
    jets = grid_jets(base, grid, table)
    u31 = _fill_normal(jets, table, eps)[0]
    p0 = 2.0 * mu * u31 / (eps * table.h) + bc.pi0(X1, X2, t)
    gp0 = grad(p0, grid)
    u1, f0 = traction_first_order(u0, grid, table, bc, eps, mu, rho0)
    f1 = f0
    ratio = fr.A1 / fr.A0
    J01 = table.J[0, 1, :2, :2]
    passes = max(1, friction_passes) if bc.friction_law.coefficient > 0.0 else 1
    for k in range(passes):
        u2 = traction_second_order(u0, grid, table, bc, eps, mu, f0, f1)
        u3 = -(eps * table.h / 3.0) * ratio * u2 - eps**3 * table.h / rho0 * np.einsum("il...,l...->i...", J01, gp0)
        u = np.stack([u0, u1, u2, u3])
        if k + 1 < passes:
            jets = grid_jets(replace(base, u=u), grid, table)
            normal = fr.w + _fill_normal(jets, table, eps).sum(axis=0)
            f1 = _friction_vector(bc, table, u.sum(axis=0), normal, rho0)
    out = eliminate_vertical(replace(stack, u=u, p0=p0, u3=None, p=None), grid, table, mu, rho0, body, p1_mode)
    return out


# -------------------------------------------------------------------- model
class NewModel:
    """Cubic-in-depth film model on a grid for one boundary regime.

    Parameters
    ----------
    grid : Grid2D
    chart, gap_field : surface chart and gap law
    regime : LubricationBC or TractionBC
        Prescribed wall velocities (pressure-driven regime) or prescribed
        normal tractions (shear-driven regime).
    eps : float
    mu, rho0 : dynamic viscosity and density
    body : BodyForce, optional
    p1_mode : {"full", "leading"}
    """

    def __init__(self, grid, chart, gap_field, regime, eps, mu, rho0, body=None, N=3, p1_mode="full"):
        if mu <= 0 or rho0 <= 0:
            raise ConfigInvalid("viscosity and density must be positive", "mu")
        _check_eps(eps)
        if not isinstance(regime, (LubricationBC, TractionBC)):
            raise ConfigInvalid("regime must be wall velocities or wall tractions", "bc")
        self.grid, self.chart, self.gap_field, self.regime = grid, chart, gap_field, regime
        self.eps, self.mu, self.rho0, self.nu = float(eps), float(mu), float(rho0), float(mu) / float(rho0)
        self.body, self.N, self.p1_mode = body, int(N), p1_mode
        self.traction = isinstance(regime, TractionBC)
        if self.traction:
            self.implicit = ImplicitDiffusion(grid, regime.edges)
        self._tables = {}

    def table(self, t):
        key = float(t)
        if key not in self._tables:
            if len(self._tables) > 4:
                self._tables.pop(next(iter(self._tables)))
            X1, X2 = self.grid.mesh()
            self._tables[key] = build_table(self.chart, self.gap_field, X1, X2, key, N=self.N)
        return self._tables[key]

    # -- constraints
    def constrain(self, stack: FieldStack) -> FieldStack:
        tb = self.table(stack.t)
        if self.traction:
            return apply_bc_traction(stack, self.regime, self.grid, tb, self.mu, self.rho0, self.body, self.p1_mode)
        p0 = solve_velocity_pressure(self.grid, tb, self.regime, self.eps, self.mu, self.rho0, stack.t)
        return apply_bc_velocity(replace(stack, p0=p0), self.regime.V, self.regime.W, self.grid, tb, self.mu,
                                 self.rho0, self.body, self.p1_mode)

    def initial_state(self, t=0.0, u0=None):
        """Closed stack at ``t``; the shear-driven regime starts from its inflow profile."""
        X1, X2 = self.grid.mesh()
        if u0 is None:
            vel = self.regime.inflow if self.traction else self.regime.V
            u0 = vel(X1, X2, t)
        return self.constrain(FieldStack.from_surface_velocity(self.eps, t, u0))

    # -- evolution
    def tendency(self, u0, t):
        """Explicit part of ``d u[0] / dt`` (shear-driven regime)."""
        stack = self.constrain(FieldStack.from_surface_velocity(self.eps, t, u0))
        tb = self.table(t)
        jets = grid_jets(stack, self.grid, tb)
        R = momentum_residuals(jets, tb, self.eps, self.nu, self.rho0, self.body, normal=False, orders=(0,))[0, :2]
        J00 = tb.J[0, 0, :2, :2]
        diff = np.stack([np.einsum("lm...,lm...->...", jets.ddu[0, i], J00) for i in range(2)])
        return -R - self.nu * diff

    def step(self, stack: FieldStack, dt) -> FieldStack:
        """Advance by ``dt``.

        Shear-driven regime: Heun for the explicit tendency of ``u[0]`` with
        backward-Euler diffusion, then the closures.  Pressure-driven regime:
        ``u[0]`` is prescribed, so the constraints are re-solved at the new
        time.

        Raises
        ------
        CFLViolation, SolverDivergence
        """
        t_new = stack.t + dt
        if dt <= 0:
            raise ConfigInvalid("time step must be positive", "dt")
        if self.traction:
            tb = self.table(stack.t)
            check_cfl(dt, self.grid, stack.u[0] - tb.C0[:2])
            X1, X2 = self.grid.mesh()

            def implicit(rhs, tn):
                weight = self.table(tn).J[0, 0, :2, :2]
                return self.implicit.solve(weight, self.nu, dt, rhs, self.regime.inflow(X1, X2, tn))

            u0 = time_step_imex(stack.u[0], stack.t, dt, self.tendency, implicit)
            new = self.constrain(FieldStack.from_surface_velocity(self.eps, t_new, u0))
        else:
            X1, X2 = self.grid.mesh()
            check_cfl(dt, self.grid, self.regime.V(X1, X2, t_new) - self.table(t_new).C0[:2])
            new = self.constrain(FieldStack.from_surface_velocity(self.eps, t_new, stack.u[0]))
        new.ut = (new.u - stack.u) / dt
        return new

    def residuals(self, stack: FieldStack):
        return residual_group1(stack, self.grid, self.table(stack.t), self.mu, self.rho0, self.body)

    def diagnostics(self, stack: FieldStack):
        """Interior max-norms of the residuals, the closure defect and each coefficient."""
        R = self.residuals(stack)
        out = {"t": float(stack.t)}
        out.update({name: interior_max(R[k], self.grid) for k, name in enumerate(RESIDUAL_NAMES)})
        out["closure"] = interior_max(closure_defect(stack, self.table(stack.t)), self.grid)
        for n in range(4):
            out[f"u{n}_norm"] = float(np.max(np.abs(stack.u[n])))
        return out

    def run(self, stack, dt, T, callback=None):
        n = int(round(T / dt))
        if n <= 0 or abs(n * dt - T) > 1e-9 * max(T, 1.0):
            raise ConfigInvalid("T must be a positive multiple of dt", "time")
        for _ in range(n):
            stack = self.step(stack, dt)
            if callback is not None:
                callback(stack)
        return stack


def advance(model: NewModel, stack: FieldStack, dt) -> FieldStack:
    """One time step of ``model`` (see :meth:`NewModel.step`)."""
    return model.step(stack, dt)


def write_snapshot_csv(stack: FieldStack, grid: Grid2D, path):
    """Node table with every velocity and pressure coefficient."""
    X1, X2 = grid.mesh()
    cols, names = [X1.ravel(), X2.ravel()], ["xi1", "xi2"]
    for n in range(4):
        for i in range(2):
            cols.append(stack.u[n, i].ravel())
            names.append(f"u{i + 1}_{n}")
    for n in range(4):
        cols.append(stack.u3[n].ravel())
        names.append(f"u3_{n}")
    for n in range(4):
        cols.append(stack.p[n].ravel())
        names.append(f"p_{n}")
    np.savetxt(path, np.column_stack(cols), delimiter=",", header=",".join(names), comments="", fmt="%.17g")


def write_residual_json(series, path):
    with open(path, "w") as fh:
        json.dump(series, fh, indent=1, sort_keys=True)
