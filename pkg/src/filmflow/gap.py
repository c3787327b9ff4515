"""Gap laws h(xi1, xi2, t) between the lower and upper surfaces."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigInvalid, NonPositiveGap


@dataclass(frozen=True)
class GapJet:
    """Gap value and derivatives: ``dh[l]``, ``ddh[l, m]``, ``ht``, ``dht[l]``."""

    h: np.ndarray
    dh: np.ndarray
    ddh: np.ndarray
    ht: np.ndarray
    dht: np.ndarray


class GapField:
    """Base class.  ``h_min`` is the positive floor that every value must exceed."""

    name = "gap"

    def __init__(self, h_min=0.0, **params):
        self.h_min = float(h_min)
        self.params = dict(params, h_min=h_min)

    def _jet(self, x1, x2, t) -> GapJet:
        raise NotImplementedError

    def evaluate(self, x1, x2, t) -> GapJet:
        x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
        jet = self._jet(x1, x2, t)
        lowest = float(np.min(jet.h))
        if lowest <= 0.0 or lowest < self.h_min:
            raise NonPositiveGap(f"gap minimum {lowest:.6g} at t={t:g} is below the floor {max(self.h_min, 0.0):g}")
        return jet


def _zeros(x1, *lead):
    return np.zeros(lead + np.shape(x1))


class ConstantGap(GapField):
    """Spatially uniform gap h = h0 / (1 + decay_rate * t)."""

    name = "constant"

    def __init__(self, h0=1.0, decay_rate=0.0, h_min=0.0):
        super().__init__(h_min=h_min, h0=h0, decay_rate=decay_rate)
        self.h0, self.lam = float(h0), float(decay_rate)

    def _jet(self, x1, x2, t):
        s = 1.0 + self.lam * t
        h = np.full(np.shape(x1), self.h0 / s)
        ht = np.full(np.shape(x1), -self.lam * self.h0 / s**2)
        return GapJet(h=h, dh=_zeros(x1, 2), ddh=_zeros(x1, 2, 2), ht=ht, dht=_zeros(x1, 2))


class LinearGap(GapField):
    """Affine gap h = h0 + g1*xi1 + g2*xi2 + rate*t (the classical slider pad)."""

    name = "linear"

    def __init__(self, h0=1.5, g1=-0.5, g2=0.0, rate=0.0, h_min=0.0):
        super().__init__(h_min=h_min, h0=h0, g1=g1, g2=g2, rate=rate)
        self.h0, self.g1, self.g2, self.rate = float(h0), float(g1), float(g2), float(rate)

    def _jet(self, x1, x2, t):
        h = self.h0 + self.g1 * x1 + self.g2 * x2 + self.rate * t
        dh = _zeros(x1, 2)
        dh[0], dh[1] = self.g1, self.g2
        ht = np.full(np.shape(x1), self.rate)
        return GapJet(h=h, dh=dh, ddh=_zeros(x1, 2, 2), ht=ht, dht=_zeros(x1, 2))


class SinusoidalGap(GapField):
    """Wavy gap h = h0 + A sin(k1 xi1 + k2 xi2 - omega t); requires h0 > |A|."""

    name = "sinusoidal"

    def __init__(self, h0=1.0, amplitude=0.2, k1=1.0, k2=2.0, omega=0.5, h_min=0.0):
        super().__init__(h_min=h_min, h0=h0, amplitude=amplitude, k1=k1, k2=k2, omega=omega)
        if h0 <= abs(amplitude):
            raise ConfigInvalid("h0 must exceed |amplitude| to keep the gap positive", "gap.params")
        self.h0, self.A = float(h0), float(amplitude)
        self.k = np.array([k1, k2], float)
        self.omega = float(omega)

    def _jet(self, x1, x2, t):
        ph = self.k[0] * x1 + self.k[1] * x2 - self.omega * t
        s, c = np.sin(ph), np.cos(ph)
        k = self.k.reshape((2,) + (1,) * np.ndim(x1))
        kk = np.einsum("i,j->ij", self.k, self.k).reshape((2, 2) + (1,) * np.ndim(x1))
        return GapJet(
            h=self.h0 + self.A * s,
            dh=self.A * k * c,
            ddh=-self.A * kk * s,
            ht=-self.A * self.omega * c,
            dht=self.A * self.omega * k * s,
        )


BUILTIN_GAPS = {"constant": ConstantGap, "linear": LinearGap, "sinusoidal": SinusoidalGap}


def make_gap(name: str, params: dict | None = None) -> GapField:
    """Instantiate a built-in gap law by name."""
    try:
        cls = BUILTIN_GAPS[name]
    except KeyError:
        raise ConfigInvalid(f"unknown gap law {name!r}; choose from {sorted(BUILTIN_GAPS)}", "gap.name")
    try:
        return cls(**(params or {}))
    except TypeError as exc:
        raise ConfigInvalid(str(exc), "gap.params") from None
