"""Minimal forward-mode dual numbers over the two in-surface parameters.

Used to differentiate the inverse-Jacobian series coefficients with respect
to ``(xi1, xi2)`` without finite differences: the seeds are the analytic
derivatives of the fundamental forms and of the gap gradient.
"""
from __future__ import annotations

import numpy as np


class Dual:
    """Value ``val`` (shape ``S``) with gradient ``grad`` (shape ``(2, *S)``)."""

    __slots__ = ("val", "grad")
    __array_priority__ = 100

    def __init__(self, val, grad):
        self.val = np.asarray(val, float)
        self.grad = np.asarray(grad, float)

    @staticmethod
    def _parts(other):
        if isinstance(other, Dual):
            return other.val, other.grad
        return np.asarray(other, float), 0.0

    def __add__(self, other):
        v, g = self._parts(other)
        return Dual(self.val + v, self.grad + g)

    __radd__ = __add__

    def __sub__(self, other):
        v, g = self._parts(other)
        return Dual(self.val - v, self.grad - g)

    def __rsub__(self, other):
        v, g = self._parts(other)
        return Dual(v - self.val, g - self.grad)

    def __neg__(self):
        return Dual(-self.val, -self.grad)

    def __mul__(self, other):
        v, g = self._parts(other)
        return Dual(self.val * v, self.grad * v + self.val * g)

    __rmul__ = __mul__

    def __truediv__(self, other):
        v, g = self._parts(other)
        return Dual(self.val / v, (self.grad * v - self.val * g) / v**2)

    def __rtruediv__(self, other):
        v, g = self._parts(other)
        return Dual(v / self.val, (g * self.val - v * self.grad) / self.val**2)
