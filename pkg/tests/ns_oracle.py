"""Independent Navier-Stokes residual in stretched film coordinates (jax).

The physical point is ``x = X(xi1, xi2, t) + eps * xi3 * h * N``.  Velocity
and pressure are cubic polynomials in ``xi3`` whose coefficients are
arbitrary smooth functions of ``(xi1, xi2, t)``.  Every derivative is
taken by automatic differentiation through the exact inverse of the 3x3
Jacobian, so nothing here shares code or series expansions with the
package.
"""
from __future__ import annotations

import jax
import jax.numpy as jnp
import numpy as np

jax.config.update("jax_enable_x64", True)


def wavy_position(A=0.1, k1=2.0, k2=1.0, omega=1.0):
    def X(x1, x2, t):
        return jnp.array([x1, x2, A * jnp.sin(k1 * x1 + k2 * x2 - omega * t)])

    return X


def torus_position(major=3.0, minor=1.0, phi0=0.0, dphi=1.0, theta0=0.2, dtheta=1.0):
    def X(x1, x2, t):
        phi = phi0 + dphi * x1
        th = theta0 + dtheta * x2
        rho = major + minor * jnp.cos(th)
        return jnp.array([rho * jnp.cos(phi), rho * jnp.sin(phi), minor * jnp.sin(th)])

    return X


def cylinder_position(radius=2.0, radius_rate=0.0):
    def X(x1, x2, t):
        R = radius + radius_rate * t
        return jnp.array([x1, R * jnp.sin(x2), R * jnp.cos(x2)])

    return X


def sinusoidal_gap(h0=1.0, A=0.2, k1=1.0, k2=2.0, omega=0.5):
    def h(x1, x2, t):
        return h0 + A * jnp.sin(k1 * x1 + k2 * x2 - omega * t)

    return h


class Oracle:
    """Residual of ``du/dt + (u.grad)u + grad p / rho0 - nu lap u - f``.

    ``coeffs(x1, x2, t)`` returns ``(4, 3)`` velocity coefficients on
    ``(a1, a2, N)``; ``pres(x1, x2, t)`` returns the four pressure
    coefficients; ``body`` is a Cartesian vector times ``1 + slope * xi3``.
    """

    def __init__(self, X, h, eps, coeffs, pres, nu=1.0, rho0=1.0, body=(0.0, 0.0, 0.0), body_slope=0.0):
        self.X, self.h, self.eps = X, h, eps
        self.coeffs, self.pres = coeffs, pres
        self.nu, self.rho0 = nu, rho0
        self.body = jnp.asarray(body, float)
        self.body_slope = body_slope
        self._jitted = {}

    def basis(self, x1, x2, t):
        a1 = jax.jacfwd(self.X, 0)(x1, x2, t)
        a2 = jax.jacfwd(self.X, 1)(x1, x2, t)
        n = jnp.cross(a1, a2)
        return jnp.stack([a1, a2, n / jnp.linalg.norm(n)])

    def position(self, xi, t):
        x1, x2, x3 = xi
        return self.X(x1, x2, t) + self.eps * x3 * self.h(x1, x2, t) * self.basis(x1, x2, t)[2]

    def velocity(self, xi, t):
        x1, x2, x3 = xi
        c = self.coeffs(x1, x2, t)
        comps = sum(x3**n * c[n] for n in range(4))
        return comps @ self.basis(x1, x2, t)

    def pressure(self, xi, t):
        x1, x2, x3 = xi
        c = self.pres(x1, x2, t)
        return sum(x3**n * c[n] for n in range(4))

    def _inv_jac(self, xi, t):
        return jnp.linalg.inv(jax.jacfwd(self.position, 0)(xi, t))

    def _grad_u(self, xi, t):
        return jax.jacfwd(self.velocity, 0)(xi, t) @ self._inv_jac(xi, t)

    def momentum(self, xi, t):
        u = self.velocity(xi, t)
        gu = self._grad_u(xi, t)
        Jinv = self._inv_jac(xi, t)
        xt = jax.jacfwd(self.position, 1)(xi, t)
        ut = jax.jacfwd(self.velocity, 1)(xi, t) - gu @ xt
        dgu = jax.jacfwd(self._grad_u, 0)(xi, t)  # [i, j, k] d/dxi_k of du_i/dx_j
        lap = jnp.einsum("ijk,kj->i", dgu, Jinv)
        gp = jax.grad(self.pressure, 0)(xi, t) @ Jinv
        f = self.body * (1.0 + self.body_slope * xi[2])
        return ut + gu @ u + gp / self.rho0 - self.nu * lap - f

    def divergence(self, xi, t):
        return jnp.trace(self._grad_u(xi, t))

    def taylor(self, fn, x1, x2, t, order=3, nodes=24, radius=0.2):
        """Coefficients of ``xi3**n`` (n = 0..order) at ``xi3 = 0``.

        ``fn`` is sampled at Chebyshev points of ``[-radius, radius]`` and the
        interpolant is converted to the monomial basis; the residual is
        analytic in ``xi3`` well beyond that interval.
        """
        z = radius * np.cos(np.pi * (np.arange(nodes) + 0.5) / nodes)
        xi = np.stack([np.full(nodes, x1), np.full(nodes, x2), z], axis=1)
        vals = np.asarray(self._batched(fn)(xi, t)).reshape(nodes, -1)
        cheb = np.polynomial.chebyshev.chebfit(z / radius, vals, nodes - 1)
        mono = np.stack([np.polynomial.chebyshev.cheb2poly(cheb[:, j])[: order + 1] for j in range(vals.shape[1])], 1)
        mono = mono / radius ** np.arange(order + 1)[:, None]
        return mono.reshape((order + 1,) + np.shape(vals[0]) if vals.shape[1] > 1 else (order + 1,))

    def _batched(self, fn):
        key = fn.__name__
        if key not in self._jitted:
            self._jitted[key] = jax.jit(jax.vmap(fn, in_axes=(0, None)))
        return self._jitted[key]

    def projected_momentum(self, x1, x2, t):
        """``(4, 3)``: momentum coefficients on the dual vectors a^1, a^2 and on N."""
        c = self.taylor(self.momentum, x1, x2, t)
        a = np.asarray(self.basis(x1, x2, t))
        dual = np.linalg.inv(a @ a.T) @ a  # rows a^1, a^2, N (N is unit and orthogonal)
        return c @ dual.T

    def continuity(self, x1, x2, t):
        return self.taylor(self.divergence, x1, x2, t)

    def jets(self, x1, x2, t):
        """Values, surface derivatives and time derivatives of the coefficients."""
        c = lambda a, b, s: self.coeffs(a, b, s)
        p = lambda a, b, s: self.pres(a, b, s)
        d1 = lambda f: jnp.stack([jax.jacfwd(f, 0)(x1, x2, t), jax.jacfwd(f, 1)(x1, x2, t)], axis=-1)

        def grad_fn(f):
            return lambda a, b, s: jnp.stack([jax.jacfwd(f, 0)(a, b, s), jax.jacfwd(f, 1)(a, b, s)], axis=-1)

        return dict(
            u=c(x1, x2, t),
            du=d1(c),
            ddu=d1(grad_fn(c)),
            ut=jax.jacfwd(c, 2)(x1, x2, t),
            p=p(x1, x2, t),
            dp=d1(p),
        )
