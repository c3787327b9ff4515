"""Inverse-Jacobian series and the geometric coefficient catalogue.

All indices are zero based: surface directions ``l, m`` run over 0, 1 and
frame directions ``i, k`` over 0, 1, 2 (2 being the normal).  Families are
stored as arrays whose leading axes are the coefficient indices and whose
trailing axes are the sample shape ``S`` of the frame.  For instance
``table.J[i, j, l, m]`` is the (l, m) entry of the (i, j) family.

Gap-dependent families need the series up to third order; they are computed
lazily, so a table built with a lower truncation order only fails when such a
family is actually requested.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .dual import Dual
from .errors import (
    ConfigInvalid,
    DegenerateParametrization,
    SingularJacobian,
    TruncationTooLow,
)
from .gap import GapJet
from .geometry import DEGENERACY_TOL, FrameData, build_frame, cross, dot

GAUSS_NODES, GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(8)
GAUSS_NODES = 0.5 * (GAUSS_NODES + 1.0)
GAUSS_WEIGHTS = 0.5 * GAUSS_WEIGHTS


@dataclass(frozen=True)
class AlphaBetaSeries:
    """Coefficients of the inverse-Jacobian expansion.

    ``alpha[n, l]`` and ``beta[n, l]`` for order ``n = 0..N`` and direction
    ``l = 0, 1, 2``; ``dalpha[n, l, m]`` is the derivative along ``xi_m``.
    """

    alpha: np.ndarray
    beta: np.ndarray
    dalpha: np.ndarray
    dbeta: np.ndarray
    A0: np.ndarray
    A1: np.ndarray
    A2: np.ndarray

    @property
    def N(self):
        return self.alpha.shape[0] - 1


def alpha_beta_series(frame: FrameData, gap: GapJet, N: int = 3) -> AlphaBetaSeries:
    """Series coefficients of the gradients of the reference coordinates.

    The tangential rows follow a three-term recursion in the metric
    aggregates; the normal row is the tangential rows contracted with the
    gap gradient.  Gradients are propagated with dual numbers seeded by the
    analytic derivatives of the fundamental forms.
    """
    if N < 0:
        raise ConfigInvalid("truncation order must be non-negative", "N")
    if np.any(frame.A0 < DEGENERACY_TOL):
        raise DegenerateParametrization("A0 below tolerance")
    E, F, G, e, f, g = (Dual(getattr(frame, n), frame.dforms[i]) for i, n in enumerate("EFGefg"))
    h1 = Dual(gap.dh[0], gap.ddh[0])
    h2 = Dual(gap.dh[1], gap.ddh[1])
    A0 = E * G - F * F
    A1 = -e * G - g * E + 2.0 * f * F
    A2 = e * g - f * f

    def extend(first, second):
        seq = [first, second]
        for n in range(2, N + 1):
            seq.append(-(seq[n - 2] * A2 + seq[n - 1] * A1) / A0)
        return seq[: N + 1]

    a10 = G / A0
    a20 = -F / A0
    b20 = E / A0
    a1 = extend(a10, -(g + a10 * A1) / A0)
    a2 = extend(a20, (f - a20 * A1) / A0)
    b2 = extend(b20, -(e + b20 * A1) / A0)
    b1 = a2
    a3 = [-(a1[n] * h1) - a2[n] * h2 for n in range(N + 1)]
    b3 = [-(b1[n] * h1) - b2[n] * h2 for n in range(N + 1)]

    alpha = [[a1[n], a2[n], a3[n]] for n in range(N + 1)]
    beta = [[b1[n], b2[n], b3[n]] for n in range(N + 1)]
    val = lambda rows: np.array([[d.val for d in row] for row in rows])
    grad = lambda rows: np.array([[d.grad for d in row] for row in rows])
    return AlphaBetaSeries(
        alpha=val(alpha), beta=val(beta), dalpha=grad(alpha), dbeta=grad(beta),
        A0=frame.A0, A1=frame.A1, A2=frame.A2,
    )


def series_gradients(series: AlphaBetaSeries, h, eps, x3, order=None):
    """Rebuild the gradient rows from a truncated series.

    Returns an array ``(3, 3, *S)``: row ``l`` holds the components of
    grad(xi_l) along ``a1, a2, a3``.
    """
    n_max = series.N if order is None else order
    if n_max > series.N:
        raise TruncationTooLow(f"order {n_max} requested from a series of order {series.N}")
    s = eps * x3 * h
    out = np.zeros((3, 3) + np.shape(h))
    for n in range(n_max + 1):
        out[:, 0] += s**n * series.alpha[n]
        out[:, 1] += s**n * series.beta[n]
    out[2, :2] *= x3 / h
    out[2, 2] = 1.0 / (eps * h)
    return out


def jacobian_inverse_oracle(chart, gap_field, eps, x1, x2, x3, t):
    """Gradient rows of (xi1, xi2, xi3) from a numerical 3x3 inversion.

    The film point is ``X + eps*xi3*h*a3``; its Jacobian is inverted
    directly and the rows are expressed in the basis ``a1, a2, a3`` through
    the Gram matrix.  Output layout matches :func:`series_gradients`.

    Raises
    ------
    SingularJacobian
        If the Jacobian condition number exceeds 1e12.
    """
    if not 0.0 < eps <= 0.5:
        raise ConfigInvalid("eps must lie in (0, 0.5]", "eps")
    x3 = np.asarray(x3, float)
    if np.any((x3 < 0.0) | (x3 > 1.0)):
        raise ConfigInvalid("xi3 must lie in [0, 1]", "xi3")
    x1, x2, x3 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float), x3)
    fr = build_frame(chart, x1, x2, t)
    gp = gap_field.evaluate(x1, x2, t)
    a, da = fr.a, fr.da
    cols = [
        a[l] + eps * x3 * (gp.dh[l] * a[2] + gp.h * da[2, l]) for l in range(2)
    ] + [eps * gp.h * a[2]]
    jac = np.moveaxis(np.stack(cols, axis=1), (0, 1), (-2, -1))  # (*S, xyz, col)
    cond = np.linalg.cond(jac)
    if np.any(~np.isfinite(cond)) or np.any(cond > 1e12):
        raise SingularJacobian(f"Jacobian condition number {float(np.max(cond)):.3e}")
    inv = np.linalg.inv(jac)  # rows are grad(xi_l)
    basis = np.moveaxis(a, (0, 1), (-1, -2))  # (*S, xyz, k)
    gram = np.swapaxes(basis, -1, -2) @ basis
    proj = np.swapaxes(basis, -1, -2) @ np.swapaxes(inv, -1, -2)  # (*S, k, l) = a_k . grad xi_l
    comps = np.linalg.solve(gram, proj)  # (*S, k, l)
    return np.moveaxis(comps, (-1, -2), (0, 1))


class CoefficientTable:
    """Every geometric coefficient family evaluated on a frame.

    Parameters
    ----------
    frame : FrameData
        Lower-surface frame at the sample points.
    gap : GapJet
        Gap value and derivatives at the same points.
    N : int
        Truncation order of the inverse-Jacobian series.
    """

    def __init__(self, frame: FrameData, gap: GapJet, N: int = 3):
        self.frame = frame
        self.gap = gap
        self.N = int(N)
        self.series = alpha_beta_series(frame, gap, self.N)
        self.h = gap.h
        self.dh = gap.dh
        self.shape = frame.shape

    # ------------------------------------------------------------------ helpers
    def _need(self, order):
        if order > self.N:
            raise TruncationTooLow(f"coefficient needs series order {order} but N={self.N}")

    @property
    def alpha(self):
        return self.series.alpha

    @property
    def beta(self):
        return self.series.beta

    def _dual_combo(self, j, i, vecs):
        """alpha^j_i (a1 . v) + beta^j_i (a2 . v) for a stack of vectors ``vecs``."""
        a = self.frame.a
        return self.alpha[j, i] * dot(a[0], vecs) + self.beta[j, i] * dot(a[1], vecs)

    @cached_property
    def sqrtA0(self):
        return np.sqrt(self.frame.A0)

    @cached_property
    def tang_dir(self):
        """``w[i, k]`` = alpha^0_i da_k/dxi1 + beta^0_i da_k/dxi2 (vectors), i = 0, 1."""
        da = self.frame.da
        return np.stack(
            [
                np.stack([self.alpha[0, i] * da[k, 0] + self.beta[0, i] * da[k, 1] for k in range(3)])
                for i in range(2)
            ]
        )

    @cached_property
    def nu_vec(self):
        """a1 x da3/dxi2 + da3/dxi1 x a2."""
        a, da = self.frame.a, self.frame.da
        return cross(a[0], da[2, 1]) + cross(da[2, 0], a[1])

    @cached_property
    def normal_proj(self):
        """``n3[l, k]`` = a3 . da_k/dxi_l."""
        a, da = self.frame.a, self.frame.da
        return np.stack([np.stack([dot(a[2], da[k, l]) for k in range(3)]) for l in range(2)])

    @cached_property
    def second_proj(self):
        """``W2[i, k, l, m]``: contravariant (i < 2) or normal (i = 2) part of d2a_k/dxi_l dxi_m."""
        a, dda = self.frame.a, self.frame.dda
        out = np.empty((3, 3, 2, 2) + self.shape)
        for k in range(3):
            for l in range(2):
                for m in range(2):
                    v = dda[k, l, m]
                    out[0, k, l, m] = self._dual_combo(0, 0, v)
                    out[1, k, l, m] = self._dual_combo(0, 1, v)
                    out[2, k, l, m] = dot(a[2], v)
        return out

    @cached_property
    def first_proj(self):
        """``H0x[i, l, k]``: H0 for i < 2 and a3 . da_k/dxi_l for i = 2."""
        out = np.empty((3, 2, 3) + self.shape)
        out[:2] = self.H[0, :2]
        out[2] = self.normal_proj
        return out

    # --------------------------------------------------------------- base families
    @cached_property
    def B(self):
        """``B[j, l, k]``, k over the two tangent vectors."""
        a = self.frame.a
        out = np.empty((self.N + 1, 3, 2) + self.shape)
        for j in range(self.N + 1):
            for l in range(3):
                for k in range(2):
                    out[j, l, k] = self._dual_combo(j, l, a[k])
        return out

    @cached_property
    def C0(self):
        a = self.frame.a
        Xt = self.frame.Xt
        return np.stack([self.alpha[0, l] * dot(a[0], Xt) + self.beta[0, l] * dot(a[1], Xt) for l in range(3)])

    def Cij(self, i, j):
        """``C^{i,j}[l]``, combining the surface velocity and the normal rate of turn."""
        self._need(max(i, j))
        Xt, a3t = self.frame.Xt, self.frame.dadt[2]
        return np.stack([self._dual_combo(i, l, Xt) + self._dual_combo(j, l, a3t) for l in range(3)])

    @cached_property
    def D(self):
        """``D[j, i, k]`` = alpha^j_i (a3 . da_k/dxi1) + beta^j_i (a3 . da_k/dxi2)."""
        n3 = self.normal_proj
        out = np.empty((self.N + 1, 3, 3) + self.shape)
        for j in range(self.N + 1):
            for i in range(3):
                for k in range(3):
                    out[j, i, k] = self.alpha[j, i] * n3[0, k] + self.beta[j, i] * n3[1, k]
        return out

    @cached_property
    def H(self):
        """``H[j, i, l, k]`` = alpha^j_i (a1 . da_k/dxi_l) + beta^j_i (a2 . da_k/dxi_l)."""
        da = self.frame.da
        out = np.empty((self.N + 1, 3, 2, 3) + self.shape)
        for j in range(self.N + 1):
            for i in range(3):
                for l in range(2):
                    for k in range(3):
                        out[j, i, l, k] = self._dual_combo(j, i, da[k, l])
        return out

    @cached_property
    def I(self):
        return dot(self.nu_vec, self.frame.a[2])

    @cached_property
    def J(self):
        """``J[i, j, l, m]`` = alpha^i_l B^j_{m,1} + beta^i_l B^j_{m,2}."""
        B = self.B
        n = self.N + 1
        out = np.empty((n, n, 3, 3) + self.shape)
        for i in range(n):
            for j in range(n):
                for l in range(3):
                    for m in range(3):
                        out[i, j, l, m] = self.alpha[i, l] * B[j, m, 0] + self.beta[i, l] * B[j, m, 1]
        return out

    @cached_property
    def K(self):
        """``K[j, i, l]``: divergence-type contraction of the series gradients."""
        s = self.series
        B, H = self.B, self.H
        n = self.N + 1
        out = np.zeros((n, n, 3) + self.shape)
        for j in range(n):
            for i in range(n):
                for l in range(3):
                    for m in range(2):
                        out[j, i, l] += (
                            s.dalpha[j, l, m] * B[i, m, 0]
                            + s.dbeta[j, l, m] * B[i, m, 1]
                            + s.alpha[j, l] * H[i, m, m, 0]
                            + s.beta[j, l] * H[i, m, m, 1]
                        )
        return out

    # ---------------------------------------------------------- structure families
    @cached_property
    def L0(self):
        """``L0[k, l, i]``; the i = 2 row is the normal-equation variant."""
        J00, K00, H0, D0 = self.J[0, 0], self.K[0, 0], self.H[0], self.D[0]
        out = np.zeros((3, 2, 3) + self.shape)
        for k in range(3):
            for l in range(2):
                for i in range(2):
                    out[k, l, i] = (K00[l] if k == i else 0.0) + 2.0 * sum(
                        H0[i, m, k] * J00[l, m] for m in range(2)
                    )
                out[k, l, 2] = (K00[l] if k == 2 else 0.0) + 2.0 * D0[l, k]
        return out

    @cached_property
    def S0(self):
        """``S0[i, k]``, rows i = 0, 1 tangential and i = 2 normal."""
        W2, H0x, J00, K00 = self.second_proj, self.first_proj, self.J[0, 0], self.K[0, 0]
        out = np.zeros((3, 3) + self.shape)
        for i in range(3):
            for k in range(3):
                for l in range(2):
                    out[i, k] += K00[l] * H0x[i, l, k]
                    for m in range(2):
                        out[i, k] += W2[i, k, l, m] * J00[l, m]
        return out

    @cached_property
    def P0(self):
        """``P0[i, k]`` for i = 0, 1 and every k (the k = 2 column extends the formula)."""
        fr = self.frame
        out = np.empty((2, 3) + self.shape)
        fac = (self.I * self.sqrtA0 - fr.A1) / fr.A0
        for i in range(2):
            for k in range(3):
                out[i, k] = (
                    fac * self.D[0, i, k]
                    + self.S0[i, k]
                    - dot(self.nu_vec, self.tang_dir[i, k]) / self.sqrtA0
                )
        return out

    @cached_property
    def Q0(self):
        """``Q0[i, k]``; the i = 2 row is the normal variant."""
        a, dadt = self.frame.a, self.frame.dadt
        H0, C0, n3 = self.H[0], self.C0, self.normal_proj
        out = np.empty((3, 3) + self.shape)
        for k in range(3):
            for i in range(2):
                out[i, k] = self._dual_combo(0, i, dadt[k]) - sum(H0[i, l, k] * C0[l] for l in range(2))
            out[2, k] = dot(a[2], dadt[k]) - sum(n3[l, k] * C0[l] for l in range(2))
        return out

    @cached_property
    def R0(self):
        out = np.empty((2, 2) + self.shape)
        for i in range(2):
            for k in range(2):
                out[i, k] = self.Q0[i, k] + self.H[0, i, k, 2] * self.frame.w
        return out

    # ------------------------------------------------------------ gap families
    @cached_property
    def eta(self):
        a = self.frame.a
        return (
            self.dh[1] * cross(a[0], a[2])
            + self.h * self.nu_vec
            + self.dh[0] * cross(a[2], a[1])
        )

    @cached_property
    def iota21(self):
        self._need(2)
        J = self.J
        return self.h**2 * (2.0 * J[2, 0, :2, :2] + J[1, 1, :2, :2])

    @cached_property
    def iota3(self):
        self._need(3)
        J = self.J
        J21 = J[2, 1, :2, :2]
        return self.h**3 * (2.0 * J[3, 0, :2, :2] + J21 + np.swapaxes(J21, 0, 1))

    def _hgrad_dot(self, mat):
        """sum_m dh/dxi_m * mat[l, m] for l = 0, 1."""
        return np.stack([sum(self.dh[m] * mat[l, m] for m in range(2)) for l in range(2)])

    @cached_property
    def tau01(self):
        self._need(1)
        J, K, h = self.J, self.K, self.h
        return self._hgrad_dot(J[1, 0]) + h * (K[1, 0, :2] + K[0, 1, :2]) + J[1, 0, 2, :2]

    @cached_property
    def tau12(self):
        self._need(1)
        J, K, h = self.J, self.K, self.h
        return self._hgrad_dot(J[1, 0]) + h * (K[1, 0, :2] + K[0, 1, :2]) + 5.0 * J[0, 1, 2, :2]

    @cached_property
    def tau02(self):
        self._need(2)
        J, K, h = self.J, self.K, self.h
        return h * (
            self._hgrad_dot(2.0 * J[2, 0] + J[1, 1])
            + h * (K[2, 0, :2] + K[1, 1, :2] + K[0, 2, :2])
            + J[1, 1, 2, :2]
            + 2.0 * J[2, 0, :2, 2]
        )

    @cached_property
    def tau23(self):
        self._need(1)
        J, K, h = self.J, self.K, self.h
        return (
            self._hgrad_dot(J[1, 0])
            + h * (K[1, 0, :2] + K[0, 1, :2])
            + 4.0 * J[1, 0, 2, :2]
            + 5.0 * J[0, 1, 2, :2]
        )

    @cached_property
    def tau13(self):
        self._need(2)
        J, K, h = self.J, self.K, self.h
        return h * (
            self._hgrad_dot(2.0 * J[2, 0] + J[1, 1])
            + h * (K[2, 0, :2] + K[1, 1, :2] + K[0, 2, :2])
            + 3.0 * J[1, 1, 2, :2]
            + 4.0 * J[0, 2, 2, :2]
            + 2.0 * J[2, 0, 2, :2]
        )

    @cached_property
    def tau03(self):
        self._need(3)
        J, K, h = self.J, self.K, self.h
        return h**2 * (
            self._hgrad_dot(3.0 * J[3, 0] + 2.0 * J[2, 1] + J[1, 2])
            + h * (K[3, 0, :2] + K[2, 1, :2] + K[1, 2, :2] + K[0, 3, :2])
            + 3.0 * J[0, 3, 2, :2]
            + 2.0 * J[1, 2, 2, :2]
            + J[2, 1, 2, :2]
        )

    def _trace_H(self, j):
        """sum_m H^j[m, m, 2]."""
        self._need(j)
        return self.H[j, 0, 0, 2] + self.H[j, 1, 1, 2]

    def _hgrad_vec(self, vec2):
        return self.dh[0] * vec2[0] + self.dh[1] * vec2[1]

    @cached_property
    def phi1(self):
        h, J00, K00 = self.h, self.J[0, 0], self.K[0, 0]
        return K00[2] / h + self._trace_H(1) - 2.0 / h**2 * self._hgrad_vec(J00[2, :2])

    @cached_property
    def phi12(self):
        self._need(2)
        h, J, K = self.h, self.J, self.K
        return (
            h * self._trace_H(2)
            - self._hgrad_vec(J[1, 0, :2, 2]) / h
            + K[1, 0, 2]
            + K[0, 1, 2]
            + 3.0 / h * J[1, 0, 2, 2]
        )

    @cached_property
    def phi22(self):
        h, J00, K00 = self.h, self.J[0, 0], self.K[0, 0]
        return (
            2.0 * (self._trace_H(1) - self._hgrad_vec(J00[2, :2]) / h**2)
            + 4.0 / h**2 * J00[2, 2]
            + 2.0 / h * K00[2]
        )

    @cached_property
    def phi33(self):
        h, J00, K00 = self.h, self.J[0, 0], self.K[0, 0]
        return 3.0 * (
            self._trace_H(1)
            - self._hgrad_vec(J00[2, :2]) / h**2
            + K00[2] / h
            + 3.0 / h**2 * J00[2, 2]
        )

    @cached_property
    def phi23(self):
        self._need(2)
        h, J, K = self.h, self.J, self.K
        return 2.0 * (
            h * self._trace_H(2)
            - self._hgrad_vec(J[0, 1, 2, :2]) / h
            + K[0, 1, 2]
            + K[1, 0, 2]
            + 5.0 / h * J[1, 0, 2, 2]
        )

    @cached_property
    def phi13(self):
        self._need(3)
        h, J, K = self.h, self.J, self.K
        return (
            self._hgrad_vec(J[2, 0, 2, :2] - J[0, 2, 2, :2])
            + h**2 * self._trace_H(3)
            + h * (K[2, 0, 2] + K[1, 1, 2] + K[0, 2, 2])
            + 4.0 * J[2, 0, 2, 2]
            + 2.0 * J[1, 1, 2, 2]
        )

    def _L_shifted(self, c):
        """L0 + (c/h) J00[2, l] delta_ki."""
        out = self.L0.copy()
        for k in range(3):
            out[k, :, k] += c / self.h * self.J[0, 0, 2, :2]
        return out

    @cached_property
    def L10(self):
        return self._L_shifted(2.0)

    @cached_property
    def L20(self):
        return self._L_shifted(4.0)

    @cached_property
    def L30(self):
        return self._L_shifted(6.0)

    def _L_mixed(self, weight, tau, normal_weight=None, rows=3):
        """sum_m H0[i, m, k] weight[l, m] + delta_ki tau_l (tangential rows).

        ``normal_weight(l, k)`` supplies the i = 2 row when ``rows == 3``.
        """
        H0 = self.H[0]
        out = np.zeros((3, 2, rows) + self.shape)
        for k in range(3):
            for l in range(2):
                for i in range(2):
                    out[k, l, i] = sum(H0[i, m, k] * weight[l, m] for m in range(2))
                    if k == i:
                        out[k, l, i] += tau[l]
                if rows == 3:
                    out[k, l, 2] = normal_weight(l, k) + (tau[l] if k == 2 else 0.0)
        return out

    @cached_property
    def L01(self):
        self._need(1)
        J10T = np.swapaxes(self.J[1, 0, :2, :2], 0, 1)
        return self._L_mixed(4.0 * self.h * J10T, self.tau01, lambda l, k: 4.0 * self.h * self.D[1, l, k])

    @cached_property
    def L11(self):
        self._need(1)
        return self._L_mixed(
            4.0 * self.h * self.J[1, 0, :2, :2], self.tau12, lambda l, k: 4.0 * self.h * self.D[1, l, k]
        )

    @cached_property
    def L02(self):
        n3, io = self.normal_proj, self.iota21
        return self._L_mixed(
            2.0 * io, self.tau02, lambda l, k: 2.0 * sum(n3[m, k] * io[l, m] for m in range(2))
        )

    @cached_property
    def L21(self):
        return self._L_mixed(4.0 * self.h * self.J[1, 0, :2, :2], self.tau23, rows=2)

    @cached_property
    def L12(self):
        return self._L_mixed(2.0 * self.iota21, self.tau13, rows=2)

    @cached_property
    def L03(self):
        return self._L_mixed(2.0 * self.iota3, self.tau03, rows=2)

    def _S_shifted(self, c, phi):
        """S0 + (c/h) sum_m H0x[i, m, k] J00[2, m] + delta_ik phi, all three rows."""
        H0x, J00 = self.first_proj, self.J[0, 0]
        out = self.S0.copy()
        for i in range(3):
            for k in range(3):
                out[i, k] += c / self.h * sum(H0x[i, m, k] * J00[2, m] for m in range(2))
                if i == k:
                    out[i, k] += phi
        return out

    @cached_property
    def S10(self):
        return self._S_shifted(2.0, self.phi1)

    @cached_property
    def S20(self):
        return self._S_shifted(4.0, self.phi22)

    @cached_property
    def S30(self):
        return self._S_shifted(6.0, self.phi33)[:2]

    def _S_mixed(self, weight, tau, phi=None, rows=3):
        """sum_l [sum_m W2[i,k,l,m] weight[l,m] + H0x[i,l,k] tau_l] + delta_ik phi."""
        W2, H0x = self.second_proj, self.first_proj
        out = np.zeros((rows, 3) + self.shape)
        for i in range(rows):
            for k in range(3):
                for l in range(2):
                    out[i, k] += H0x[i, l, k] * tau[l]
                    for m in range(2):
                        out[i, k] += W2[i, k, l, m] * weight[l, m]
                if phi is not None and i == k:
                    out[i, k] += phi
        return out

    @cached_property
    def S01(self):
        return self._S_mixed(2.0 * self.h * self.J[1, 0, :2, :2], self.tau01)

    @cached_property
    def S11(self):
        return self._S_mixed(2.0 * self.h * self.J[1, 0, :2, :2], self.tau12, self.phi12)

    @cached_property
    def S02(self):
        return self._S_mixed(self.iota21, self.tau02)

    @cached_property
    def S21(self):
        return self._S_mixed(2.0 * self.h * self.J[1, 0, :2, :2], self.tau23, self.phi23, rows=2)

    @cached_property
    def S12(self):
        return self._S_mixed(self.iota21, self.tau13, self.phi13, rows=2)

    @cached_property
    def S03(self):
        return self._S_mixed(self.iota3, self.tau03, rows=2)

    @cached_property
    def Sbar(self):
        """Compact viscous reaction coefficient ``Sbar[i, k]`` (i = 0, 1).

        The bracket carrying the normal-curvature invariant enters with a plus
        sign, which is what makes ``Sbar = P0 + chi`` hold identically.
        """
        fr = self.frame
        out = np.empty((2, 3) + self.shape)
        for i in range(2):
            for k in range(3):
                out[i, k] = (
                    self.S0[i, k]
                    - fr.A1 / fr.A0 * self.D[0, i, k]
                    - sum(self.H[0, i, l, k] * self.J[0, 0, 2, l] for l in range(2)) / self.h
                    + (self.h * self.I * self.D[0, i, k] - dot(self.tang_dir[i, k], self.eta))
                    / (self.h * self.sqrtA0)
                )
        return out

    @cached_property
    def chi(self):
        a = self.frame.a
        c32 = cross(a[2], a[1]) / self.sqrtA0
        c13 = cross(a[0], a[2]) / self.sqrtA0
        out = np.empty((2, 3) + self.shape)
        for i in range(2):
            for k in range(3):
                wik = self.tang_dir[i, k]
                s1 = sum(self.H[0, i, l, k] * self.alpha[0, l] for l in range(2)) - dot(c32, wik)
                s2 = sum(self.H[0, i, l, k] * self.beta[0, l] for l in range(2)) - dot(c13, wik)
                out[i, k] = (self.dh[0] * s1 + self.dh[1] * s2) / self.h
        return out

    @cached_property
    def psi(self):
        """``psi[i, j, l]`` (all indices tangential)."""
        out = np.empty((2, 2, 2) + self.shape)
        J00 = self.J[0, 0]
        for i in range(2):
            for j in range(2):
                for l in range(2):
                    val = self.dh[j] * J00[l, i]
                    if i == j:
                        val = val + self.alpha[0, l] * self.dh[0] + self.beta[0, l] * self.dh[1]
                    out[i, j, l] = val / self.h
        return out

    @cached_property
    def kappa(self):
        fr = self.frame
        h, J00, da = self.h, self.J[0, 0], fr.da
        out = np.empty((2,) + self.shape)
        for i in range(2):
            val = sum(fr.dw[l] * (self.L0[2, l, i] - fr.A1 / fr.A0 * J00[i, l]) for l in range(2))
            val = val - J00[2, i] / h**2 * self.gap.ht
            val = val - 3.0 / h * sum(J00[k, i] * self.gap.dht[k] for k in range(2))
            bracket = (
                self.S0[i, 2]
                - sum(J00[2, l] * self.H[0, i, l, 2] for l in range(2)) / h
                - sum(J00[l, i] / self.sqrtA0 * dot(da[2, l], self.eta) for l in range(2)) / h
            )
            out[i] = val + fr.w * bracket
        return out

    # -------------------------------------------------------------- forcing
    def forcing(self, body_coeffs, f_r0, f_r1, s0, rho0, integral=False):
        """Depth forcing ``F[i]`` (i = 0, 1).

        ``body_coeffs[n, k]`` are the xi3-power coefficients of the body
        force components; ``f_r0`` and ``f_r1`` are the leading friction
        vectors (Cartesian) at the lower and upper walls.  With
        ``integral=True`` the body force is averaged over the depth with
        8-point Gauss-Legendre quadrature; otherwise only its xi3^0
        coefficient is kept.
        """
        body = np.asarray(body_coeffs, float)
        if integral:
            powers = GAUSS_NODES[:, None] ** np.arange(body.shape[0])[None, :]
            weights = GAUSS_WEIGHTS @ powers  # integral of xi3^n
            base = np.tensordot(weights, body, axes=(0, 0))[:2]
        else:
            base = body[0, :2]
        a = self.frame.a
        fr = np.asarray(f_r0, float) + np.asarray(f_r1, float)
        out = np.empty((2,) + self.shape)
        for i in range(2):
            proj = dot(fr, self.alpha[0, i] * a[0] + self.beta[0, i] * a[1])
            out[i] = base[i] + s0 / (rho0 * self.h) * proj
        return out

    # -------------------------------------------------------------- export
    def named_arrays(self):
        """Flat ``name -> array`` mapping of every family (1-based index labels)."""
        out = {}

        def put(name, arr, labels):
            arr = np.asarray(arr)
            lead = arr.ndim - len(self.shape)
            for idx in np.ndindex(*arr.shape[:lead]):
                tag = "".join(str(labels[d][v]) for d, v in enumerate(idx))
                out[f"{name}_{tag}" if tag else name] = arr[idx]

        one = lambda n: list(range(1, n + 1))
        orders = list(range(self.N + 1))
        fr = self.frame
        for name in "EFGefg":
            put(name, getattr(fr, name), [])
        put("A0", fr.A0, [])
        put("A1", fr.A1, [])
        put("A2", fr.A2, [])
        put("M", fr.M, [one(2), one(2)])
        put("alpha", self.alpha, [orders, one(3)])
        put("beta", self.beta, [orders, one(3)])
        put("B", self.B, [orders, one(3), one(2)])
        put("C0", self.C0, [one(3)])
        for i in range(1, self.N + 1):
            for j in range(self.N + 1):
                put(f"C{i}{j}", self.Cij(i, j), [one(3)])
        put("D", self.D, [orders, one(3), one(3)])
        put("H", self.H, [orders, one(3), one(2), one(3)])
        put("I", self.I, [])
        put("J", self.J, [orders, orders, one(3), one(3)])
        put("K", self.K, [orders, orders, one(3)])
        put("L0", self.L0, [one(3), one(2), one(3)])
        put("P0", self.P0, [one(2), one(3)])
        put("Q0", self.Q0, [one(3), one(3)])
        put("R0", self.R0, [one(2), one(2)])
        put("S0", self.S0, [one(3), one(3)])
        if self.N >= 3:
            put("eta", self.eta, [["x", "y", "z"]])
            put("iota21", self.iota21, [one(2), one(2)])
            put("iota3", self.iota3, [one(2), one(2)])
            put("kappa", self.kappa, [one(2)])
            for nm in ("tau01", "tau12", "tau02", "tau23", "tau13", "tau03"):
                put(nm, getattr(self, nm), [one(2)])
            for nm in ("phi1", "phi12", "phi22", "phi33", "phi23", "phi13"):
                put(nm, getattr(self, nm), [])
            for nm in ("L10", "L20", "L30", "L01", "L11", "L02"):
                put(nm, getattr(self, nm), [one(3), one(2), one(3)])
            for nm in ("L21", "L12", "L03"):
                put(nm, getattr(self, nm), [one(3), one(2), one(2)])
            for nm in ("S10", "S20", "S01", "S11", "S02"):
                put(nm, getattr(self, nm), [one(3), one(3)])
            for nm in ("S30", "S21", "S12", "S03", "Sbar", "chi"):
                put(nm, getattr(self, nm), [one(2), one(3)])
            put("psi", self.psi, [one(2), one(2), one(2)])
        return out


def build_table(chart, gap_field, x1, x2, t, N=3) -> CoefficientTable:
    """Frame, gap and coefficient table at the given points."""
    x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
    frame = build_frame(chart, x1, x2, t)
    return CoefficientTable(frame, gap_field.evaluate(x1, x2, t), N=N)
