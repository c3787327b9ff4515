import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from filmflow.coefficients import build_table
from filmflow.discretization import Grid2D
from filmflow.errors import CFLViolation, ConfigInvalid
from filmflow.gap import ConstantGap, LinearGap, SinusoidalGap
from filmflow.geometry import Cylinder, Plane
from filmflow.shallow_water import (
    PressureProfile,
    ShallowWaterModel,
    ShallowWaterState,
    TractionBC,
    pi1_consistency,
    sw_rhs,
)
from filmflow.velocity import ModulatedVelocity

NEUMANN = {e: "neumann" for e in ("left", "right", "bottom", "top")}


def plane_table(g, gap=None, t=0.0):
    X1, X2 = g.mesh()
    return build_table(Plane(), gap or ConstantGap(1.0), X1, X2, t)


def uniform(g, v):
    return np.stack([np.full(g.shape, float(v[0])), np.full(g.shape, float(v[1]))])


@settings(max_examples=20, deadline=None)
@given(v1=st.floats(-2, 2), v2=st.floats(-2, 2), pi0=st.floats(-5, 5))
def test_uniform_state_has_zero_tendency(v1, v2, pi0):
    g = Grid2D(9, 9)
    bc = TractionBC(pi0=pi0, friction=0.0, inflow=(v1, v2))
    tend = sw_rhs(ShallowWaterState(uniform(g, (v1, v2)), None, 0.0), plane_table(g), g, bc, 1.0, 1.0)
    assert np.max(np.abs(tend)) <= 1e-12


def test_pressure_slope_drives_uniform_acceleration():
    g = Grid2D(9, 9)
    bc = TractionBC(pi0=PressureProfile(0.0, (0.8, 0.0)))
    tend = sw_rhs(ShallowWaterState(uniform(g, (0.3, 0.1)), None, 0.0), plane_table(g), g, bc, 1.0, 2.0)
    assert np.max(np.abs(tend[0] + 0.4)) <= 1e-13
    assert np.max(np.abs(tend[1])) <= 1e-13


def test_friction_tendency_matches_scalar_law():
    g = Grid2D(9, 9)
    C, h, v = 0.5, 1.3, 0.7
    bc = TractionBC(friction=C, s0=-1, inflow=(v, 0.0))
    tend = sw_rhs(ShallowWaterState(uniform(g, (v, 0.0)), None, 0.0), plane_table(g, ConstantGap(h)), g, bc, 1.0, 1.0)
    assert np.max(np.abs(tend[0] + 2.0 * C * v * v / h)) <= 1e-13


def test_two_groupings_give_same_tendency():
    g = Grid2D(17, 17)
    X1, X2 = g.mesh()
    tb = build_table(Cylinder(2.0, 0.3), SinusoidalGap(), X1, X2, 0.4)
    bc = TractionBC(pi0=PressureProfile(0.2, (0.1, -0.3)), friction=0.4, inflow=ModulatedVelocity((0.5, 1.0), 0.3, 2.0))
    state = ShallowWaterState(bc.inflow(X1, X2, 0.4), None, 0.4)
    a = sw_rhs(state, tb, g, bc, 0.7, 1.1, form="v2")
    b = sw_rhs(state, tb, g, bc, 0.7, 1.1, form="new")
    assert np.max(np.abs(a - b)) <= 1e-10


def decay_model(dt_ok=True, C=0.5, h=1.0):
    g = Grid2D(9, 9)
    bc = TractionBC(pi0=0.0, friction=C, s0=-1, inflow=(1.0, 0.0), edges=NEUMANN)
    return ShallowWaterModel(g, Plane(), ConstantGap(h), bc, 1.0, 1.0)


def decay_error(dt, C=0.5, h=1.0):
    m = decay_model(C=C, h=h)
    s = m.run(m.initial_state(), dt, 1.0)
    exact = 1.0 / (1.0 + 2.0 * C * 1.0 / h)
    return float(np.max(np.abs(s.V[0] - exact)))


def test_decay_matches_ode():
    assert decay_error(0.01) <= 1e-3


def test_decay_second_order_in_time():
    ratio = decay_error(0.05) / decay_error(0.025)
    assert 3.5 <= ratio <= 4.5


def test_uniform_state_preserved_for_many_steps():
    g = Grid2D(9, 9)
    bc = TractionBC(pi0=0.7, inflow=(0.4, -0.3))
    m = ShallowWaterModel(g, Plane(), ConstantGap(1.0), bc, 1.0, 1.0)
    s0 = m.initial_state()
    s = m.run(s0, 0.01, 10.0)
    assert np.max(np.abs(s.V - s0.V)) <= 1e-13
    assert np.max(np.abs(s.p0 - 0.7)) <= 1e-14


def test_pressure_follows_gap_rate():
    g = Grid2D(9, 9)
    gamma, mu = 0.2, 1.5
    bc = TractionBC(pi0=0.3, inflow=(0.0, 0.0))
    m = ShallowWaterModel(g, Plane(), LinearGap(1.0, 0.0, 0.0, rate=gamma), bc, mu, 1.0)
    s = m.step(m.initial_state(), 0.01)
    assert np.max(np.abs(s.p0 - (2 * mu * gamma / (1.0 + gamma * 0.01) + 0.3))) <= 1e-13


def test_cfl_guard():
    m = decay_model()
    with pytest.raises(CFLViolation):
        m.step(m.initial_state(), 0.2)


def test_run_needs_whole_steps():
    m = decay_model()
    with pytest.raises(ConfigInvalid):
        m.run(m.initial_state(), 0.03, 0.1)


def test_pi1_residual_cases():
    g = Grid2D(9, 9)
    X1, _ = g.mesh()
    tb = plane_table(g, LinearGap(1.0, 0.5))
    V = uniform(g, (0.3, 0.2))
    state = ShallowWaterState(V, None, 0.0)
    same = TractionBC(pi0=0.4)
    assert not np.any(pi1_consistency(state, tb, g, same, 1.0))
    shifted = TractionBC(pi0=0.4, pi1=0.4 + 0.25)
    assert np.max(np.abs(pi1_consistency(state, tb, g, shifted, 1.0) + 0.25)) <= 1e-15
    a, mu = 0.6, 1.3
    W = V + np.stack([a * X1, 0 * X1])
    expected = 0.4 + mu * a + mu * 0.5 * a * X1 / (1.0 + 0.5 * X1) - 0.4
    assert np.max(np.abs(pi1_consistency(state, tb, g, same, mu, W=W) - expected)) <= 1e-10


def test_traction_bc_validation():
    with pytest.raises(ConfigInvalid):
        TractionBC(s0=0)
    with pytest.raises(ConfigInvalid):
        TractionBC(edges={"left": "periodic"})
    with pytest.raises(ConfigInvalid):
        TractionBC(friction=-1.0)
