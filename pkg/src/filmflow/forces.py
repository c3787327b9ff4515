"""Body-force and wall-friction laws."""
from __future__ import annotations

import numpy as np

from .errors import ConfigInvalid, MissingFriction
from .geometry import dot


class BodyForce:
    """Body force per unit mass given as a Cartesian vector, optionally varying
    linearly across the film: ``f(xi3) = vector * (1 + depth_slope * xi3)``.

    :meth:`coefficients` returns the xi3-power coefficients of its
    components on the lower-wall basis (dual projection on a1, a2, plain
    projection on the unit normal), shape ``(4, 3, *S)``.
    """

    def __init__(self, vector=(0.0, 0.0, 0.0), depth_slope=0.0):
        self.vector = np.asarray(vector, float)
        if self.vector.shape != (3,):
            raise ConfigInvalid("body force needs three Cartesian components", "body_force.vector")
        self.depth_slope = float(depth_slope)

    def coefficients(self, table):
        fr = table.frame
        g = self.vector.reshape((3,) + (1,) * len(table.shape)) * np.ones(table.shape)
        a1g, a2g = dot(fr.a[0], g), dot(fr.a[1], g)
        comps = np.stack(
            [table.alpha[0, i] * a1g + table.beta[0, i] * a2g for i in range(2)] + [dot(fr.a[2], g)]
        )
        out = np.zeros((4, 3) + table.shape)
        out[0] = comps
        out[1] = self.depth_slope * comps
        return out


class QuadraticFriction:
    """Leading friction vector ``rho0 * C * |u| u`` (the film-ratio factor is taken out).

    ``coefficient`` is the rescaled constant C (friction itself is ``eps * C``).
    """

    def __init__(self, coefficient=0.0):
        self.coefficient = float(coefficient)
        if self.coefficient < 0.0:
            raise ConfigInvalid("friction coefficient must be non-negative", "bc.friction")

    def __call__(self, velocity, rho0):
        """``velocity`` is a Cartesian vector field of shape ``(3, *S)``."""
        if not np.all(np.isfinite(velocity)):
            raise MissingFriction("wall velocity for the friction law is not finite")
        speed = np.sqrt(np.sum(velocity**2, axis=0))
        return rho0 * self.coefficient * speed * velocity

    @staticmethod
    def wall_vector(frame, tangential, normal):
        """Cartesian vector ``u1 a1 + u2 a2 + u3 a3`` from its components."""
        a = frame.a
        return tangential[0] * a[0] + tangential[1] * a[1] + normal * a[2]
