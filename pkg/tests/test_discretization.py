import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from filmflow.discretization import (
    Grid2D,
    ImplicitDiffusion,
    LinearSystem,
    boundary_fluxes,
    check_cfl,
    derivative,
    dirichlet_system,
    div_weighted,
    divergence_matrix,
    grad,
    hessian,
    solve_sparse,
    time_step_imex,
)
from filmflow.errors import CFLViolation, ConfigInvalid, NonSPDWeight, SolverDivergence

coef = st.floats(-2.0, 2.0)


def identity_weight(g, scale=1.0):
    W = np.zeros((2, 2) + g.shape)
    W[0, 0] = W[1, 1] = scale
    return W


def test_grid_invariants():
    g = Grid2D(17, 9)
    assert g.spacing == (1 / 16, 1 / 8)
    assert g.boundary_mask.sum() == 2 * 17 + 2 * 9 - 4
    with pytest.raises(ConfigInvalid):
        Grid2D(5, 17)


def test_grad_of_linear_field_exact():
    g = Grid2D(17, 17)
    X1, _ = g.mesh()
    G = grad(X1, g)
    assert np.max(np.abs(G[0] - 1.0)) <= 1e-13 and np.max(np.abs(G[1])) <= 1e-13


def _sine_error(n):
    g = Grid2D(n, n)
    X1, _ = g.mesh()
    return float(np.max(np.abs(derivative(np.sin(np.pi * X1), g, 0) - np.pi * np.cos(np.pi * X1)))), g.d1


def test_grad_truncation_bound():
    err, d = _sine_error(65)
    assert err <= 1.3 * (np.pi * d) ** 2


def test_grad_second_order_refinement():
    assert 3.6 <= _sine_error(33)[0] / _sine_error(65)[0] <= 4.4


@settings(max_examples=25, deadline=None)
@given(c=st.lists(coef, min_size=6, max_size=6))
def test_stencils_reproduce_quadratics(c):
    g = Grid2D(12, 10)
    X1, X2 = g.mesh()
    f = c[0] + c[1] * X1 + c[2] * X2 + c[3] * X1**2 + c[4] * X1 * X2 + c[5] * X2**2
    G = grad(f, g)
    assert np.max(np.abs(G[0] - (c[1] + 2 * c[3] * X1 + c[4] * X2))) <= 1e-11
    assert np.max(np.abs(G[1] - (c[2] + c[4] * X1 + 2 * c[5] * X2))) <= 1e-11
    H = hessian(f, g)
    inner = (slice(1, -1), slice(1, -1))
    assert np.max(np.abs(H[0, 0][inner] - 2 * c[3])) <= 1e-9
    assert np.max(np.abs(H[0, 1][inner] - c[4])) <= 1e-9
    assert np.max(np.abs(H[1, 1][inner] - 2 * c[5])) <= 1e-9


def test_div_weighted_laplacian_of_quadratic():
    g = Grid2D(17, 17)
    X1, X2 = g.mesh()
    assert np.max(np.abs(div_weighted(identity_weight(g), X1**2 + X2**2, g) - 4.0)) <= 1e-10


def test_div_weighted_constant_flux():
    g = Grid2D(17, 17)
    X1, X2 = g.mesh()
    W = np.zeros((2, 2) + g.shape)
    W[0, 0], W[0, 1], W[1, 0], W[1, 1] = 2.0, 0.3, 0.3, 0.5
    assert np.max(np.abs(div_weighted(W, 1.0 + 2.0 * X1 - 3.0 * X2, g))) <= 1e-10


def test_div_weighted_manufactured_order():
    errs = []
    for n in (17, 33, 65):
        g = Grid2D(n, n)
        X1, X2 = g.mesh()
        p = np.sin(np.pi * X1) * np.sin(np.pi * X2)
        errs.append(np.max(np.abs(div_weighted(identity_weight(g), p, g) + 2 * np.pi**2 * p[1:-1, 1:-1])))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.9)


def test_non_spd_weight_rejected():
    g = Grid2D(9, 9)
    W = identity_weight(g)
    W[0, 1] = 2.0
    W[1, 0] = 2.0
    with pytest.raises(NonSPDWeight):
        divergence_matrix(W, g)


def _variable_weight(g):
    X1, X2 = g.mesh()
    W = np.zeros((2, 2) + g.shape)
    W[0, 0] = 1.0 + 0.5 * X1
    W[1, 1] = 1.2 + 0.3 * np.sin(X2)
    W[0, 1] = W[1, 0] = 0.2 * X1 * X2
    return W


def test_dirichlet_system_is_symmetric():
    g = Grid2D(17, 13)
    A = divergence_matrix(_variable_weight(g), g)
    s = dirichlet_system(A, np.zeros(g.shape), g, 0.0, symmetric=True)
    asym = abs(s.matrix - s.matrix.T).max()
    assert asym <= 1e-12 * abs(s.matrix).max()


def test_discrete_divergence_theorem():
    g = Grid2D(21, 17)
    X1, X2 = g.mesh()
    W = _variable_weight(g)
    p = np.exp(X1) * np.cos(2 * X2)
    total = div_weighted(W, p, g).sum() * g.d1 * g.d2
    assert abs(total - boundary_fluxes(W, p, g)) <= 1e-10


def test_poisson_direct_solve():
    g = Grid2D(33, 33)
    X1, X2 = g.mesh()
    exact = X1**2 - X2**2 + X1 * X2
    A = divergence_matrix(identity_weight(g), g)
    s = dirichlet_system(A, np.zeros(g.shape), g, exact, symmetric=True)
    p = solve_sparse(s)
    assert s.info["method"] == "lu"
    assert np.max(np.abs(p - exact)) <= 1e-9


def test_cg_path_iteration_budget():
    g = Grid2D(203, 203)
    X1, X2 = g.mesh()
    exact = np.sin(2 * X1) * np.cosh(X2)
    A = divergence_matrix(_variable_weight(g), g)
    s = dirichlet_system(A, A @ exact.ravel(), g, exact, symmetric=True)
    p = solve_sparse(s)
    assert s.info["method"] == "cg"
    assert s.info["iterations"] <= 5 * g.n1
    assert np.max(np.abs(p - exact)) <= 1e-9


def test_all_neumann_system_is_singular():
    g = Grid2D(9, 9)
    A = divergence_matrix(identity_weight(g), g)
    B, _ = ImplicitDiffusion(g, {e: "neumann" for e in ("left", "right", "bottom", "top")}).boundary_rows()
    full = sp.csr_matrix(A + B)
    s = LinearSystem(full, np.ones(g.size), np.ones(g.shape, bool), np.zeros(g.shape))
    with pytest.raises(SolverDivergence):
        solve_sparse(s)


def test_solve_is_deterministic():
    g = Grid2D(33, 33)
    A = divergence_matrix(_variable_weight(g), g)
    X1, X2 = g.mesh()
    a = solve_sparse(dirichlet_system(A, np.sin(X1), g, X2, symmetric=True))
    b = solve_sparse(dirichlet_system(A, np.sin(X1), g, X2, symmetric=True))
    assert np.array_equal(a, b)


def test_imex_pure_decay():
    v = np.ones((1, 9, 9))
    for k in range(10):
        v = time_step_imex(v, 0.1 * k, 0.1, lambda s, t: -s)
    assert np.max(np.abs(v - np.exp(-1.0))) <= 1e-3


def test_imex_implicit_diffusion_keeps_linear_profile():
    g = Grid2D(17, 17)
    X1, _ = g.mesh()
    diff = ImplicitDiffusion(g)
    state = (2.0 * X1)[None]
    W = identity_weight(g)
    impl = lambda rhs, t: diff.solve(W, 0.5, 0.05, rhs, state)
    new = time_step_imex(state, 0.0, 0.05, lambda s, t: np.zeros_like(s), impl)
    assert np.max(np.abs(new - state)) <= 1e-12


def test_frozen_advection_moves_bump():
    g = Grid2D(129, 9)
    X1, _ = g.mesh()
    speed, dt, T = 0.5, 0.002, 1.0
    state = np.exp(-((X1 - 0.25) / 0.05) ** 2)[None]
    rhs = lambda s, t: -speed * derivative(s[0], g, 0)[None]
    for k in range(int(round(T / dt))):
        check_cfl(dt, g, speed)
        state = time_step_imex(state, k * dt, dt, rhs)
    peak = g.x1[np.argmax(state[0, :, 4])]
    assert abs(peak - (0.25 + speed * T)) <= g.d1


def test_cfl_violation():
    g = Grid2D(17, 17)
    with pytest.raises(CFLViolation):
        check_cfl(0.1, g, np.array([1.0]))
    check_cfl(0.01, g, np.array([1.0]))
