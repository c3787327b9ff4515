"""Moving lower surface: charts, local frame, fundamental forms.

A chart maps the unit square ``D = [0, 1]^2`` into R^3 at every time.  All
evaluators are vectorised: ``x1`` and ``x2`` may be arrays of any (common)
shape ``S`` and ``t`` is a scalar.  Vector-valued quantities carry their
Cartesian component axis *before* the sample axes, e.g. ``X`` has shape
``(3, *S)`` and ``a`` (the frame) has shape ``(3, 3, *S)`` with ``a[k]`` the
k-th basis vector.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateParametrization, ConfigInvalid

DEGENERACY_TOL = 1e-14

# central-difference weights for derivative orders 0..3 (offsets -2..2)
_FD_WEIGHTS = {
    0: {0: 1.0},
    1: {-1: -0.5, 1: 0.5},
    2: {-1: 1.0, 0: -2.0, 1: 1.0},
    3: {-2: -0.5, -1: 1.0, 1: -1.0, 2: 0.5},
}


def dot(u, v):
    """Cartesian dot product along the leading axis."""
    return np.einsum("i...,i...->...", u, v)


def cross(u, v):
    """Cartesian cross product along the leading axis."""
    return np.stack(
        [
            u[1] * v[2] - u[2] * v[1],
            u[2] * v[0] - u[0] * v[2],
            u[0] * v[1] - u[1] * v[0],
        ]
    )


@dataclass(frozen=True)
class ChartJet:
    """Chart derivatives at a set of sample points.

    Index convention: ``dX[i]`` is dX/dxi_i, ``d2X[i, j]`` is
    d2X/dxi_i dxi_j, ``dXt[i]`` is d2X/dt dxi_i and so on.  Every entry ends
    with the Cartesian axis followed by the sample axes.
    """

    X: np.ndarray
    dX: np.ndarray
    d2X: np.ndarray
    d3X: np.ndarray
    Xt: np.ndarray
    dXt: np.ndarray
    d2Xt: np.ndarray
    Xtt: np.ndarray


class SurfaceChart:
    """Base class for parametrised lower surfaces.

    Subclasses implement :meth:`derivative`, returning the mixed partial
    derivative of order ``(p, q, s)`` in ``(xi1, xi2, t)``.  Derivatives up to
    third order in space, second order in time (only ``Xtt`` is needed) and
    the mixed ``(t, xi, xi)`` terms are required.
    """

    name = "chart"

    def __init__(self, **params):
        self.params = dict(params)

    def derivative(self, x1, x2, t, p, q, s):
        raise NotImplementedError

    def position(self, x1, x2, t):
        return self.derivative(x1, x2, t, 0, 0, 0)

    def jet(self, x1, x2, t) -> ChartJet:
        x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
        d = lambda p, q, s: np.asarray(self.derivative(x1, x2, t, p, q, s), float)
        order = lambda *axes: (axes.count(0), axes.count(1))

        dX = np.stack([d(*order(i), 0) for i in range(2)])
        d2X = np.stack([np.stack([d(*order(i, j), 0) for j in range(2)]) for i in range(2)])
        d3X = np.stack(
            [
                np.stack([np.stack([d(*order(i, j, k), 0) for k in range(2)]) for j in range(2)])
                for i in range(2)
            ]
        )
        dXt = np.stack([d(*order(i), 1) for i in range(2)])
        d2Xt = np.stack([np.stack([d(*order(i, j), 1) for j in range(2)]) for i in range(2)])
        return ChartJet(
            X=d(0, 0, 0), dX=dX, d2X=d2X, d3X=d3X,
            Xt=d(0, 0, 1), dXt=dXt, d2Xt=d2Xt, Xtt=d(0, 0, 2),
        )


def _zeros_like_vec(x1):
    return np.zeros((3,) + np.shape(x1))


def _const_vec(vec, x1):
    out = _zeros_like_vec(x1)
    out[:] = np.asarray(vec, float).reshape((3,) + (1,) * np.ndim(x1))
    return out


class AffineChart(SurfaceChart):
    """X = origin + xi1*u + xi2*v + t*w: planes, inclined and translating."""

    name = "affine"

    def __init__(self, u=(1.0, 0.0, 0.0), v=(0.0, 1.0, 0.0), w=(0.0, 0.0, 0.0), origin=(0.0, 0.0, 0.0), **params):
        super().__init__(**params)
        self.u = np.asarray(u, float)
        self.v = np.asarray(v, float)
        self.w = np.asarray(w, float)
        self.origin = np.asarray(origin, float)

    def derivative(self, x1, x2, t, p, q, s):
        x1 = np.asarray(x1, float)
        if p + q + s == 0:
            return (
                _const_vec(self.origin, x1)
                + self.u.reshape((3,) + (1,) * x1.ndim) * x1
                + self.v.reshape((3,) + (1,) * x1.ndim) * x2
                + self.w.reshape((3,) + (1,) * x1.ndim) * t
            )
        if (p, q, s) == (1, 0, 0):
            return _const_vec(self.u, x1)
        if (p, q, s) == (0, 1, 0):
            return _const_vec(self.v, x1)
        if (p, q, s) == (0, 0, 1):
            return _const_vec(self.w, x1)
        return _zeros_like_vec(x1)


class Plane(AffineChart):
    """Static horizontal plane X = (xi1, xi2, 0)."""

    name = "plane"

    def __init__(self):
        super().__init__()


class InclinedPlane(AffineChart):
    """Static plane X = (xi1, xi2, s1*xi1 + s2*xi2) with a non-orthogonal metric."""

    name = "inclined_plane"

    def __init__(self, slope1=0.3, slope2=0.2):
        super().__init__(u=(1.0, 0.0, slope1), v=(0.0, 1.0, slope2), slope1=slope1, slope2=slope2)


class TranslatingPlane(AffineChart):
    """Rigidly moving plane X = (xi1 + v1 t, xi2 + v2 t, v3 t)."""

    name = "translating_plane"

    def __init__(self, velocity=(1.0, 0.0, 0.0)):
        super().__init__(w=tuple(velocity), velocity=tuple(velocity))


class Cylinder(SurfaceChart):
    """Cylinder patch X = (xi1, R sin xi2, R cos xi2) with radius R(t) = R0 + R1 t."""

    name = "cylinder"

    def __init__(self, radius=2.0, radius_rate=0.0):
        super().__init__(radius=radius, radius_rate=radius_rate)
        self.R0 = float(radius)
        self.R1 = float(radius_rate)

    def radius(self, t):
        return self.R0 + self.R1 * t

    def derivative(self, x1, x2, t, p, q, s):
        x1 = np.asarray(x1, float)
        x2 = np.asarray(x2, float)
        out = _zeros_like_vec(x1)
        if p == 0:
            rs = (self.radius(t), self.R1, 0.0)[s] if s < 3 else 0.0
            out[1] = rs * np.sin(x2 + q * np.pi / 2)
            out[2] = rs * np.cos(x2 + q * np.pi / 2)
        if (p, q, s) == (0, 0, 0):
            out[0] = x1
        elif (p, q, s) == (1, 0, 0):
            out[0] = 1.0
        return out


class Torus(SurfaceChart):
    """Torus patch with toroidal angle phi0 + dphi*xi1 and poloidal angle theta0 + dtheta*xi2."""

    name = "torus"

    def __init__(self, major=3.0, minor=1.0, phi0=0.0, dphi=1.0, theta0=0.2, dtheta=1.0):
        super().__init__(major=major, minor=minor, phi0=phi0, dphi=dphi, theta0=theta0, dtheta=dtheta)
        if minor >= major:
            raise ConfigInvalid("minor radius must be smaller than major radius", "chart.params.minor")
        self.Rm, self.r = float(major), float(minor)
        self.phi0, self.dphi = float(phi0), float(dphi)
        self.theta0, self.dtheta = float(theta0), float(dtheta)

    def derivative(self, x1, x2, t, p, q, s):
        x1 = np.asarray(x1, float)
        out = _zeros_like_vec(x1)
        if s > 0:
            return out
        phi = self.phi0 + self.dphi * x1
        theta = self.theta0 + self.dtheta * np.asarray(x2, float)
        if q == 0:
            rho = self.Rm + self.r * np.cos(theta)
        else:
            rho = self.r * np.cos(theta + q * np.pi / 2)
        scale = self.dphi**p * self.dtheta**q
        out[0] = scale * rho * np.cos(phi + p * np.pi / 2)
        out[1] = scale * rho * np.sin(phi + p * np.pi / 2)
        if p == 0:
            out[2] = scale * self.r * np.sin(theta + q * np.pi / 2)
        return out


class WavySurface(SurfaceChart):
    """Travelling wave X = (xi1, xi2, A sin(k1 xi1 + k2 xi2 - omega t))."""

    name = "wavy"

    def __init__(self, amplitude=0.1, k1=2.0, k2=1.0, omega=1.0):
        super().__init__(amplitude=amplitude, k1=k1, k2=k2, omega=omega)
        self.A, self.k1, self.k2, self.omega = float(amplitude), float(k1), float(k2), float(omega)

    def derivative(self, x1, x2, t, p, q, s):
        x1 = np.asarray(x1, float)
        x2 = np.asarray(x2, float)
        out = _zeros_like_vec(x1)
        phase = self.k1 * x1 + self.k2 * x2 - self.omega * t
        n = p + q + s
        out[2] = self.A * self.k1**p * self.k2**q * (-self.omega) ** s * np.sin(phase + n * np.pi / 2)
        if (p, q, s) == (0, 0, 0):
            out[0], out[1] = x1, x2
        elif (p, q, s) == (1, 0, 0):
            out[0] = 1.0
        elif (p, q, s) == (0, 1, 0):
            out[1] = 1.0
        return out


class FiniteDifferenceChart(SurfaceChart):
    """Adapter turning a bare position function into a chart.

    Derivatives are central differences of ``position(x1, x2, t)``.  A
    derivative of total order ``n`` uses the step ``step * 10**(n - 1)`` (so
    that round-off stays below truncation error); ``richardson=True`` combines
    two step sizes to cancel the leading error term.  Expect roughly six
    significant digits on third derivatives with the defaults, against
    machine precision for the analytic charts.
    """

    name = "finite_difference"

    def __init__(self, position, step=1e-5, richardson=False):
        super().__init__(step=step, richardson=richardson)
        if not 1e-7 <= step <= 1e-3:
            raise ConfigInvalid("finite-difference step must lie in [1e-7, 1e-3]", "step")
        self._position = position
        self.step = float(step)
        self.richardson = bool(richardson)

    def position(self, x1, x2, t):
        return np.asarray(self._position(x1, x2, t), float)

    def _stencil(self, x1, x2, t, p, q, s, hstep):
        total = np.zeros((3,) + np.shape(x1))
        for o1, w1 in _FD_WEIGHTS[p].items():
            for o2, w2 in _FD_WEIGHTS[q].items():
                for o3, w3 in _FD_WEIGHTS[s].items():
                    total = total + (w1 * w2 * w3) * self.position(
                        x1 + o1 * hstep, x2 + o2 * hstep, t + o3 * hstep
                    )
        return total / hstep ** (p + q + s)

    def derivative(self, x1, x2, t, p, q, s):
        x1 = np.asarray(x1, float)
        n = p + q + s
        if n == 0:
            return self.position(x1, x2, t)
        hstep = self.step * 10.0 ** (n - 1)
        coarse = self._stencil(x1, x2, t, p, q, s, hstep)
        if not self.richardson:
            return coarse
        fine = self._stencil(x1, x2, t, p, q, s, hstep / 2)
        return (4.0 * fine - coarse) / 3.0


BUILTIN_CHARTS = {
    "plane": Plane,
    "inclined_plane": InclinedPlane,
    "translating_plane": TranslatingPlane,
    "cylinder": Cylinder,
    "torus": Torus,
    "wavy": WavySurface,
}


def make_chart(name: str, params: dict | None = None) -> SurfaceChart:
    """Instantiate a built-in chart by name."""
    try:
        cls = BUILTIN_CHARTS[name]
    except KeyError:
        raise ConfigInvalid(f"unknown chart {name!r}; choose from {sorted(BUILTIN_CHARTS)}", "chart.name")
    try:
        return cls(**(params or {}))
    except TypeError as exc:
        raise ConfigInvalid(str(exc), "chart.params") from None


@dataclass(frozen=True)
class FrameData:
    """Local basis, fundamental forms and their derivatives at sample points.

    ``a[k]`` are a1, a2 and the unit normal a3; ``da[k, l]`` is da_k/dxi_l,
    ``dda[k, l, m]`` the second derivatives and ``dadt[k]`` the time
    derivative.  ``dforms[n, m]`` holds d/dxi_m of (E, F, G, e, f, g)[n].
    ``w``, ``dw``, ``ddw`` and ``w_t`` describe the normal surface speed
    dX/dt . a3 and its derivatives.
    """

    x1: np.ndarray
    x2: np.ndarray
    t: float
    jet: ChartJet
    a: np.ndarray
    da: np.ndarray
    dda: np.ndarray
    dadt: np.ndarray
    E: np.ndarray
    F: np.ndarray
    G: np.ndarray
    e: np.ndarray
    f: np.ndarray
    g: np.ndarray
    A0: np.ndarray
    A1: np.ndarray
    A2: np.ndarray
    M: np.ndarray
    dforms: np.ndarray
    w: np.ndarray
    dw: np.ndarray
    ddw: np.ndarray
    w_t: np.ndarray
    extra: dict = field(default_factory=dict)

    @property
    def Xt(self):
        return self.jet.Xt

    @property
    def sqrtA0(self):
        return np.sqrt(self.A0)

    @property
    def shape(self):
        return np.shape(self.E)


def frame_from_jet(jet: ChartJet, x1, x2, t) -> FrameData:
    """Assemble the frame and all derived scalars from chart derivatives."""
    a1, a2 = jet.dX[0], jet.dX[1]
    n = cross(a1, a2)
    r2 = dot(n, n)
    if np.any(r2 < DEGENERACY_TOL):
        raise DegenerateParametrization(
            f"|a1 x a2|^2 = {float(np.min(r2)):.3e} below {DEGENERACY_TOL:g}"
        )
    r = np.sqrt(r2)
    a3 = n / r

    # derivatives of the unnormalised normal n = a1 x a2
    dn = np.stack(
        [cross(jet.d2X[0, l], a2) + cross(a1, jet.d2X[1, l]) for l in range(2)]
    )
    ddn = np.stack(
        [
            np.stack(
                [
                    cross(jet.d3X[0, l, m], a2)
                    + cross(jet.d2X[0, l], jet.d2X[1, m])
                    + cross(jet.d2X[0, m], jet.d2X[1, l])
                    + cross(a1, jet.d3X[1, l, m])
                    for m in range(2)
                ]
            )
            for l in range(2)
        ]
    )
    dr = np.stack([dot(a3, dn[l]) for l in range(2)])
    da3 = np.stack([(dn[l] - a3 * dr[l]) / r for l in range(2)])
    dda3 = np.empty((2, 2) + n.shape)
    for l in range(2):
        for m in range(2):
            drlm = dot(da3[m], dn[l]) + dot(a3, ddn[l, m])
            dda3[l, m] = (
                ddn[l, m] - da3[m] * dr[l] - a3 * drlm
            ) / r - da3[l] * dr[m] / r
    dnt = cross(jet.dXt[0], a2) + cross(a1, jet.dXt[1])
    da3t = (dnt - a3 * dot(a3, dnt)) / r

    a = np.stack([a1, a2, a3])
    da = np.stack([jet.d2X[0], jet.d2X[1], da3])
    dda = np.stack([jet.d3X[0], jet.d3X[1], dda3])
    dadt = np.stack([jet.dXt[0], jet.dXt[1], da3t])

    E, F, G = dot(a1, a1), dot(a1, a2), dot(a2, a2)
    e, f, g = dot(a3, jet.d2X[0, 0]), dot(a3, jet.d2X[0, 1]), dot(a3, jet.d2X[1, 1])
    A0 = E * G - F**2
    A1 = -e * G - g * E + 2 * f * F
    A2 = e * g - f**2
    M = np.stack([np.stack([G, -F]), np.stack([-F, E])])

    dforms = np.empty((6, 2) + E.shape)
    for m in range(2):
        dforms[0, m] = 2 * dot(a1, jet.d2X[0, m])
        dforms[1, m] = dot(jet.d2X[0, m], a2) + dot(a1, jet.d2X[1, m])
        dforms[2, m] = 2 * dot(a2, jet.d2X[1, m])
        dforms[3, m] = dot(da3[m], jet.d2X[0, 0]) + dot(a3, jet.d3X[0, 0, m])
        dforms[4, m] = dot(da3[m], jet.d2X[0, 1]) + dot(a3, jet.d3X[0, 1, m])
        dforms[5, m] = dot(da3[m], jet.d2X[1, 1]) + dot(a3, jet.d3X[1, 1, m])

    Xt = jet.Xt
    w = dot(Xt, a3)
    dw = np.stack([dot(jet.dXt[l], a3) + dot(Xt, da3[l]) for l in range(2)])
    ddw = np.empty((2, 2) + E.shape)
    for l in range(2):
        for m in range(2):
            ddw[l, m] = (
                dot(jet.d2Xt[l, m], a3)
                + dot(jet.dXt[l], da3[m])
                + dot(jet.dXt[m], da3[l])
                + dot(Xt, dda3[l, m])
            )
    w_t = dot(jet.Xtt, a3) + dot(Xt, da3t)

    return FrameData(
        x1=np.asarray(x1, float), x2=np.asarray(x2, float), t=float(t), jet=jet,
        a=a, da=da, dda=dda, dadt=dadt,
        E=E, F=F, G=G, e=e, f=f, g=g, A0=A0, A1=A1, A2=A2, M=M,
        dforms=dforms, w=w, dw=dw, ddw=ddw, w_t=w_t,
    )


def build_frame(chart: SurfaceChart, x1, x2, t) -> FrameData:
    """Evaluate the local frame of ``chart`` at parameter points ``(x1, x2)`` and time ``t``.

    Raises
    ------
    DegenerateParametrization
        If ``|a1 x a2|^2 < 1e-14`` anywhere.
    """
    x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
    return frame_from_jet(chart.jet(x1, x2, t), x1, x2, t)


def fd_derivative_oracle(chart: SurfaceChart, x1, x2, t, step=1e-5, richardson=False) -> FrameData:
    """Frame built only from central differences of the chart position.

    Used as an independent check on the analytic derivatives of a chart.
    """
    fd = FiniteDifferenceChart(chart.position, step=step, richardson=richardson)
    return build_frame(fd, x1, x2, t)


def second_form_variants(frame: FrameData) -> dict:
    """Every textbook expression of e, f, g (normal-derivative and tangent-derivative forms)."""
    a, da = frame.a, frame.da
    return {
        "e": [-dot(a[0], da[2, 0]), dot(a[2], da[0, 0])],
        "f": [
            -dot(a[0], da[2, 1]),
            -dot(a[1], da[2, 0]),
            dot(a[2], da[0, 1]),
            dot(a[2], da[1, 0]),
        ],
        "g": [-dot(a[1], da[2, 1]), dot(a[2], da[1, 1])],
    }
