"""Prescribed tangential wall velocities (contravariant components on a1, a2)."""
from __future__ import annotations

import numpy as np

from .errors import ConfigInvalid


class WallVelocity:
    """Base class; subclasses implement :meth:`value` returning shape ``(2, *S)``.

    Spatial and time derivatives use fourth-order central differences of
    the analytic profile, so they do not depend on any grid.
    """

    name = "wall_velocity"
    step = 1e-3

    def __init__(self, **params):
        self.params = params

    def value(self, x1, x2, t):
        raise NotImplementedError

    def __call__(self, x1, x2, t):
        x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
        return self.value(x1, x2, t)

    def _d(self, f, x1, x2, t, axis):
        s = self.step
        shift = lambda k: f(
            x1 + k * s * (axis == 0), x2 + k * s * (axis == 1), t + k * s * (axis == 2)
        )
        return (-shift(2) + 8.0 * shift(1) - 8.0 * shift(-1) + shift(-2)) / (12.0 * s)

    def grad(self, x1, x2, t):
        """``G[i, l]`` = dV_i/dxi_l."""
        return np.stack([self._d(self, x1, x2, t, 0), self._d(self, x1, x2, t, 1)], axis=1)

    def hessian(self, x1, x2, t):
        """``H[i, l, m]`` = d2V_i/dxi_l dxi_m."""
        g = lambda a, b, c: self.grad(a, b, c)
        out = np.stack([self._d(g, x1, x2, t, 0), self._d(g, x1, x2, t, 1)], axis=-len(np.shape(x1)) - 1)
        return out

    def dt(self, x1, x2, t):
        return self._d(self, x1, x2, t, 2)


class UniformVelocity(WallVelocity):
    """Constant components ``value = (v1, v2)``."""

    name = "uniform"

    def __init__(self, value=(0.0, 0.0)):
        super().__init__(value=list(value))
        self.v = np.asarray(value, float)
        if self.v.shape != (2,):
            raise ConfigInvalid("uniform velocity needs two components", "value")

    def value(self, x1, x2, t):
        return self.v.reshape((2,) + (1,) * np.ndim(x1)) * np.ones(np.shape(x1))

    def grad(self, x1, x2, t):
        return np.zeros((2, 2) + np.shape(x1))

    def hessian(self, x1, x2, t):
        return np.zeros((2, 2, 2) + np.shape(x1))

    def dt(self, x1, x2, t):
        return np.zeros((2,) + np.shape(x1))


class ModulatedVelocity(WallVelocity):
    """``base * (1 + amplitude * sin(pi (k1 xi1 + k2 xi2) - omega t))``."""

    name = "modulated"

    def __init__(self, base=(0.0, 1.0), amplitude=0.5, k1=1.0, k2=0.0, omega=0.0):
        super().__init__(base=list(base), amplitude=amplitude, k1=k1, k2=k2, omega=omega)
        self.base = np.asarray(base, float)
        if self.base.shape != (2,):
            raise ConfigInvalid("modulated velocity needs a two-component base", "base")
        self.A, self.k1, self.k2, self.omega = float(amplitude), float(k1), float(k2), float(omega)

    def value(self, x1, x2, t):
        s = 1.0 + self.A * np.sin(np.pi * (self.k1 * x1 + self.k2 * x2) - self.omega * t)
        return self.base.reshape((2,) + (1,) * np.ndim(x1)) * s


BUILTIN_VELOCITIES = {"uniform": UniformVelocity, "modulated": ModulatedVelocity}


def make_velocity(spec) -> WallVelocity:
    """Build a wall velocity from a ``{"name": ..., "params": {...}}`` mapping,
    a two-component sequence, or pass an existing instance through."""
    if isinstance(spec, WallVelocity):
        return spec
    if spec is None:
        return UniformVelocity()
    if isinstance(spec, dict):
        name = spec.get("name")
        if name not in BUILTIN_VELOCITIES:
            raise ConfigInvalid(f"unknown velocity profile {name!r}; choose from {sorted(BUILTIN_VELOCITIES)}", "name")
        try:
            return BUILTIN_VELOCITIES[name](**spec.get("params", {}))
        except TypeError as exc:
            raise ConfigInvalid(str(exc), "params") from None
    return UniformVelocity(spec)
