import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from filmflow.errors import ConfigInvalid, DegenerateParametrization
from filmflow.geometry import (
    BUILTIN_CHARTS,
    AffineChart,
    Cylinder,
    Plane,
    Torus,
    build_frame,
    cross,
    dot,
    fd_derivative_oracle,
    make_chart,
    second_form_variants,
)

unit = st.floats(0.0, 1.0)
times = st.floats(0.0, 2.0)


def frame_at(chart, x1, x2, t=0.0):
    return build_frame(chart, np.atleast_1d(float(x1)), np.atleast_1d(float(x2)), t)


def test_plane_frame_is_flat_identity():
    fr = frame_at(Plane(), 0.3, 0.8, t=1.7)
    for name, val in dict(E=1, F=0, G=1, e=0, f=0, g=0, A0=1, A1=0, A2=0).items():
        assert getattr(fr, name)[0] == val, name
    assert np.array_equal(fr.M[..., 0], np.eye(2))


@pytest.mark.parametrize("x2", [0.0, 0.4, 1.0])
def test_cylinder_frame_hand_values(x2):
    fr = frame_at(Cylinder(radius=2.0), 0.25, x2)
    assert fr.E[0] == pytest.approx(1.0, abs=1e-14)
    assert fr.F[0] == pytest.approx(0.0, abs=1e-14)
    assert fr.G[0] == pytest.approx(4.0, abs=1e-14)
    assert fr.e[0] == pytest.approx(0.0, abs=1e-14)
    assert fr.f[0] == pytest.approx(0.0, abs=1e-14)
    assert fr.g[0] == pytest.approx(-2.0, abs=1e-14)
    assert fr.A0[0] == pytest.approx(4.0, abs=1e-14)
    assert fr.A1[0] == pytest.approx(2.0, abs=1e-14)
    assert fr.A2[0] == pytest.approx(0.0, abs=1e-14)
    np.testing.assert_allclose(fr.a[2][:, 0], [0.0, np.sin(x2), np.cos(x2)], atol=1e-14)


@pytest.mark.parametrize("name", sorted(BUILTIN_CHARTS))
@settings(max_examples=20, deadline=None)
@given(x1=unit, x2=unit, t=times)
def test_normal_is_unit_and_orthogonal(name, x1, x2, t):
    fr = frame_at(make_chart(name), x1, x2, t)
    a = fr.a
    assert abs(dot(a[2], a[2])[0] - 1.0) <= 1e-12
    assert abs(dot(a[2], a[0])[0]) <= 1e-12
    assert abs(dot(a[2], a[1])[0]) <= 1e-12


@pytest.mark.parametrize("name", sorted(BUILTIN_CHARTS))
@settings(max_examples=20, deadline=None)
@given(x1=unit, x2=unit, t=times)
def test_area_element_two_ways(name, x1, x2, t):
    fr = frame_at(make_chart(name), x1, x2, t)
    n = cross(fr.a[0], fr.a[1])
    assert fr.A0[0] == pytest.approx(dot(n, n)[0], rel=1e-12, abs=1e-12)
    assert fr.A0[0] == pytest.approx((fr.E * fr.G - fr.F**2)[0], rel=1e-12)
    assert fr.A1[0] == pytest.approx((-fr.e * fr.G - fr.g * fr.E + 2 * fr.f * fr.F)[0], abs=1e-12)
    assert fr.A2[0] == pytest.approx((fr.e * fr.g - fr.f**2)[0], abs=1e-12)


@pytest.mark.parametrize("name", sorted(BUILTIN_CHARTS))
@settings(max_examples=20, deadline=None)
@given(x1=unit, x2=unit, t=times)
def test_second_form_expressions_agree(name, x1, x2, t):
    fr = frame_at(make_chart(name), x1, x2, t)
    for key, forms in second_form_variants(fr).items():
        ref = getattr(fr, key)
        for f in forms:
            assert abs(f[0] - ref[0]) <= 1e-10, key


def test_degenerate_chart_rejected():
    chart = AffineChart(u=(1.0, 0.0, 0.0), v=(2.0, 0.0, 0.0))
    with pytest.raises(DegenerateParametrization):
        frame_at(chart, 0.5, 0.5)


def test_unknown_chart_name():
    with pytest.raises(ConfigInvalid) as exc:
        make_chart("sphere")
    assert exc.value.path == "chart.name"


def _frame_error(a, b):
    fields = ("E", "F", "G", "e", "f", "g", "A0", "A1", "A2")
    return max(float(np.max(np.abs(getattr(a, k) - getattr(b, k)))) for k in fields)


def test_fd_oracle_plane_is_exact():
    x = np.linspace(0.1, 0.9, 4)
    assert _frame_error(fd_derivative_oracle(Plane(), x, x, 0.0), build_frame(Plane(), x, x, 0.0)) <= 1e-10


def test_fd_oracle_cylinder_relative():
    x1, x2 = np.linspace(0.1, 0.9, 4), np.linspace(0.0, 1.0, 4)
    ref = build_frame(Cylinder(), x1, x2, 0.3)
    fd = fd_derivative_oracle(Cylinder(), x1, x2, 0.3, step=1e-3, richardson=True)
    assert _frame_error(fd, ref) / 4.0 <= 1e-6


def test_fd_oracle_torus_second_order():
    x1, x2 = np.array([0.3, 0.7]), np.array([0.6, 0.2])
    ref = build_frame(Torus(), x1, x2, 0.0)
    e1 = _frame_error(fd_derivative_oracle(Torus(), x1, x2, 0.0, step=1e-3), ref)
    e2 = _frame_error(fd_derivative_oracle(Torus(), x1, x2, 0.0, step=5e-4), ref)
    assert 3.5 <= e1 / e2 <= 4.5


@pytest.mark.parametrize("name", sorted(BUILTIN_CHARTS))
def test_analytic_derivatives_match_differences(name):
    chart = make_chart(name)
    x1, x2 = np.array([0.2, 0.55, 0.9]), np.array([0.35, 0.7, 0.1])
    fd = fd_derivative_oracle(chart, x1, x2, 0.4, step=1e-3, richardson=True)
    ref = build_frame(chart, x1, x2, 0.4)
    scale = max(1.0, float(np.max(np.abs(ref.a))))
    assert float(np.max(np.abs(fd.da - ref.da))) / scale <= 1e-6
    assert float(np.max(np.abs(fd.dadt - ref.dadt))) / scale <= 1e-6
