"""Momentum and continuity kernels against an autodiff residual of the full equations."""
import numpy as np
import pytest

pytest.importorskip("jax")
import jax.numpy as jnp  # noqa: E402

from filmflow.coefficients import build_table  # noqa: E402
from filmflow.forces import BodyForce  # noqa: E402
from filmflow.gap import SinusoidalGap  # noqa: E402
from filmflow.geometry import Cylinder, Torus, WavySurface  # noqa: E402
from filmflow.new_model import FieldJets, continuity_coefficients, momentum_residuals  # noqa: E402

from ns_oracle import Oracle, cylinder_position, sinusoidal_gap, torus_position, wavy_position  # noqa: E402

EPS, NU, RHO0 = 0.3, 0.7, 1.3
BODY, SLOPE = (0.2, -0.4, 0.9), 0.5
POINT = (0.37, 0.61, 0.45)

CHARTS = {
    "wavy": (wavy_position, WavySurface),
    "torus": (torus_position, Torus),
    "cylinder": (lambda: cylinder_position(2.0, 0.3), lambda: Cylinder(2.0, 0.3)),
}


def coeffs(x1, x2, t):
    rows = []
    for n in range(4):
        rows.append(jnp.array([
            0.3 * jnp.sin(1.1 * x1 + 0.7 * n * x2 + 0.3 * t) + 0.1 * n,
            0.2 * jnp.cos(0.9 * x2 - 0.5 * n * x1 + 0.2 * t) - 0.05 * n,
            0.15 * jnp.sin(0.8 * x1 + 1.3 * x2 + n + 0.4 * t),
        ]) / (1 + n))
    return jnp.stack(rows)


def pres(x1, x2, t):
    return jnp.array([jnp.cos(x1 + 2 * x2 + n - 0.3 * t) / (1 + n) for n in range(4)])


@pytest.fixture(scope="module", params=sorted(CHARTS))
def case(request):
    position, chart = CHARTS[request.param]
    oracle = Oracle(position(), sinusoidal_gap(), EPS, coeffs, pres, NU, RHO0, body=BODY, body_slope=SLOPE)
    x1, x2, t = POINT
    raw = {k: np.array(v) for k, v in oracle.jets(x1, x2, t).items()}
    jets = FieldJets(u=raw["u"], du=raw["du"], ddu=raw["ddu"], ut=raw["ut"], p=raw["p"], dp=raw["dp"])
    tb = build_table(chart(), SinusoidalGap(), np.array(x1), np.array(x2), t)
    return dict(
        ref_mom=np.array(oracle.projected_momentum(x1, x2, t)),
        ref_cont=np.array(oracle.continuity(x1, x2, t)),
        mom=momentum_residuals(jets, tb, EPS, NU, RHO0, BodyForce(BODY, SLOPE)),
        cont=continuity_coefficients(jets, tb, EPS),
    )


def test_momentum_coefficients_match(case):
    ref, got = case["ref_mom"], case["mom"]
    scale = max(1.0, float(np.max(np.abs(ref))))
    assert np.max(np.abs(got[:3] - ref[:3])) <= 1e-8 * scale
    assert np.max(np.abs(got[3, :2] - ref[3, :2])) <= 1e-8 * scale


def test_top_normal_momentum_not_evaluated(case):
    # the cubic profile cannot close the top normal balance; it is left out
    assert case["mom"][3, 2] == 0.0


def test_continuity_coefficients_match(case):
    ref, got = case["ref_cont"], case["cont"]
    assert np.max(np.abs(np.asarray(got) - ref)) <= 1e-8 * max(1.0, float(np.max(np.abs(ref))))
