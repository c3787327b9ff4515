"""Uniform grid on the unit square, finite differences, sparse solves, IMEX stepping."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import CFLViolation, ConfigInvalid, NonSPDWeight, SolverDivergence

EDGES = ("left", "right", "bottom", "top")
DIRECT_SOLVE_LIMIT = 200 * 200


@dataclass(frozen=True)
class Grid2D:
    """Tensor grid with ``n1 x n2`` nodes on [0, 1]^2 (first index along xi1)."""

    n1: int
    n2: int

    def __post_init__(self):
        if self.n1 < 8 or self.n2 < 8:
            raise ConfigInvalid("grids need at least 8 nodes per direction", "grid")

    @property
    def d1(self):
        return 1.0 / (self.n1 - 1)

    @property
    def d2(self):
        return 1.0 / (self.n2 - 1)

    @property
    def spacing(self):
        return (self.d1, self.d2)

    @property
    def shape(self):
        return (self.n1, self.n2)

    @property
    def size(self):
        return self.n1 * self.n2

    @property
    def x1(self):
        return np.linspace(0.0, 1.0, self.n1)

    @property
    def x2(self):
        return np.linspace(0.0, 1.0, self.n2)

    def mesh(self):
        return np.meshgrid(self.x1, self.x2, indexing="ij")

    def edge_mask(self, edge):
        m = np.zeros(self.shape, bool)
        if edge == "left":
            m[0, :] = True
        elif edge == "right":
            m[-1, :] = True
        elif edge == "bottom":
            m[:, 0] = True
        elif edge == "top":
            m[:, -1] = True
        else:
            raise ConfigInvalid(f"unknown edge {edge!r}", "edge")
        return m

    @property
    def boundary_mask(self):
        m = np.zeros(self.shape, bool)
        m[0, :] = m[-1, :] = m[:, 0] = m[:, -1] = True
        return m

    def index(self, i, j):
        return i * self.n2 + j


# --------------------------------------------------------------------- stencils
def derivative(f, grid: Grid2D, axis: int):
    """Second-order derivative along ``axis`` (central inside, one-sided at edges)."""
    return np.gradient(f, grid.spacing[axis], axis=axis, edge_order=2)


def grad(f, grid: Grid2D):
    """Gradient ``(df/dxi1, df/dxi2)`` of a node field."""
    return np.stack([derivative(f, grid, 0), derivative(f, grid, 1)])


def _second_along(f, step, axis):
    f = np.moveaxis(f, axis, 0)
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / step**2
    out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / step**2
    out[-1] = (2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]) / step**2
    return np.moveaxis(out, 0, axis)


def hessian(f, grid: Grid2D):
    """Second derivatives ``H[l, m]``: compact three-point pure terms, nested central mixed term."""
    out = np.empty((2, 2) + np.shape(f))
    out[0, 0] = _second_along(f, grid.d1, 0)
    out[1, 1] = _second_along(f, grid.d2, 1)
    out[0, 1] = out[1, 0] = derivative(derivative(f, grid, 0), grid, 1)
    return out


def derivative4(f, step, axis):
    """Fourth-order first derivative (five-point, one-sided near the ends)."""
    f = np.moveaxis(np.asarray(f, float), axis, -1)
    out = np.empty_like(f)
    out[..., 2:-2] = (-f[..., 4:] + 8.0 * f[..., 3:-1] - 8.0 * f[..., 1:-3] + f[..., :-4]) / (12.0 * step)
    c0 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
    c1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0
    out[..., 0] = f[..., :5] @ c0 / step
    out[..., 1] = f[..., :5] @ c1 / step
    out[..., -1] = -(f[..., -1:-6:-1] @ c0) / step
    out[..., -2] = -(f[..., -1:-6:-1] @ c1) / step
    return np.moveaxis(out, -1, axis)


def grad4(f, grid: Grid2D):
    """Fourth-order gradient of a smooth coefficient field (trailing grid axes)."""
    return np.stack([derivative4(f, grid.d1, -2), derivative4(f, grid.d2, -1)])


# -------------------------------------------------------------- linear systems
@dataclass
class LinearSystem:
    """Sparse system over all grid nodes with Dirichlet rows eliminated.

    ``matrix`` acts on the unknown (non-Dirichlet) nodes only; ``unknown``
    is the boolean node mask of those nodes and ``values`` carries the
    prescribed Dirichlet values on the remaining nodes.
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    unknown: np.ndarray
    values: np.ndarray
    symmetric: bool = False
    info: dict = field(default_factory=dict)


def check_spd(weight):
    """Raise :class:`NonSPDWeight` unless every node's 2x2 weight is SPD."""
    w11, w12, w21, w22 = weight[0, 0], weight[0, 1], weight[1, 0], weight[1, 1]
    scale = np.maximum(np.abs(w11) + np.abs(w22), 1e-300)
    if np.max(np.abs(w12 - w21) / scale) > 1e-12:
        raise NonSPDWeight("weight matrix is not symmetric")
    if np.any(w11 <= 0.0) or np.any(w11 * w22 - w12 * w21 <= 0.0):
        raise NonSPDWeight("weight matrix is not positive definite")


def _face_avg(w, axis):
    w = np.moveaxis(w, axis, 0)
    return np.moveaxis(0.5 * (w[1:] + w[:-1]), 0, axis)


def divergence_matrix(weight, grid: Grid2D):
    """Flux-form operator p -> sum_l d_l (sum_m W_lm d_m p) on all nodes.

    Pure terms use face-averaged weights; the cross terms use node weights
    with centred differences, which keeps the assembled matrix symmetric.
    Boundary rows are left empty (they are replaced by boundary conditions).
    """
    check_spd(weight)
    n1, n2 = grid.shape
    d1, d2 = grid.spacing
    rows, cols, vals = [], [], []
    ii, jj = np.meshgrid(np.arange(1, n1 - 1), np.arange(1, n2 - 1), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    node = lambda i, j: i * n2 + j

    def add(ti, tj, v):
        rows.append(node(ii, jj))
        cols.append(node(ti, tj))
        vals.append(np.broadcast_to(v, ii.shape).copy())

    wx = _face_avg(weight[0, 0], 0)  # (n1-1, n2) between i and i+1
    wy = _face_avg(weight[1, 1], 1)  # (n1, n2-1)
    e_ = wx[ii, jj] / d1**2
    w_ = wx[ii - 1, jj] / d1**2
    n_ = wy[ii, jj] / d2**2
    s_ = wy[ii, jj - 1] / d2**2
    add(ii + 1, jj, e_)
    add(ii - 1, jj, w_)
    add(ii, jj + 1, n_)
    add(ii, jj - 1, s_)
    add(ii, jj, -(e_ + w_ + n_ + s_))
    c = 1.0 / (4.0 * d1 * d2)
    w12, w21 = weight[0, 1], weight[1, 0]
    # d1(W12 d2 p)
    add(ii + 1, jj + 1, c * w12[ii + 1, jj])
    add(ii + 1, jj - 1, -c * w12[ii + 1, jj])
    add(ii - 1, jj + 1, -c * w12[ii - 1, jj])
    add(ii - 1, jj - 1, c * w12[ii - 1, jj])
    # d2(W21 d1 p)
    add(ii + 1, jj + 1, c * w21[ii, jj + 1])
    add(ii - 1, jj + 1, -c * w21[ii, jj + 1])
    add(ii + 1, jj - 1, -c * w21[ii, jj - 1])
    add(ii - 1, jj - 1, c * w21[ii, jj - 1])
    A = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(grid.size, grid.size)
    )
    return A.tocsr()


def boundary_fluxes(weight, p, grid: Grid2D):
    """Total flux of ``W grad p`` leaving the interior block through its faces.

    The sum over interior nodes of ``divergence_matrix @ p`` times the cell
    area telescopes exactly to this value.
    """
    d1, d2 = grid.spacing
    g1c = np.zeros_like(p)
    g2c = np.zeros_like(p)
    g2c[:, 1:-1] = (p[:, 2:] - p[:, :-2]) / (2 * d2)
    g1c[1:-1, :] = (p[2:, :] - p[:-2, :]) / (2 * d1)
    wx = _face_avg(weight[0, 0], 0)
    wy = _face_avg(weight[1, 1], 1)
    G = weight[0, 1] * g2c  # cross flux in xi1 at nodes
    Hc = weight[1, 0] * g1c  # cross flux in xi2 at nodes
    js = slice(1, -1)
    fx_hi = wx[-1, js] * (p[-1, js] - p[-2, js]) / d1 + 0.5 * (G[-1, js] + G[-2, js])
    fx_lo = wx[0, js] * (p[1, js] - p[0, js]) / d1 + 0.5 * (G[1, js] + G[0, js])
    fy_hi = wy[js, -1] * (p[js, -1] - p[js, -2]) / d2 + 0.5 * (Hc[js, -1] + Hc[js, -2])
    fy_lo = wy[js, 0] * (p[js, 1] - p[js, 0]) / d2 + 0.5 * (Hc[js, 1] + Hc[js, 0])
    return d2 * (fx_hi.sum() - fx_lo.sum()) + d1 * (fy_hi.sum() - fy_lo.sum())


def div_weighted(weight, p, grid: Grid2D):
    """Flux-form ``div(W grad p)`` at interior nodes, shape ``(n1-2, n2-2)``.

    The potential ``p`` (not its gradient) is taken, since the symmetric
    flux form differences the potential across faces.
    """
    A = divergence_matrix(weight, grid)
    return (A @ np.asarray(p, float).ravel()).reshape(grid.shape)[1:-1, 1:-1]


def nonconservative_matrix(a, b, grid: Grid2D, c=None):
    """Interior rows of ``sum a_lm d_lm p + sum b_l d_l p + c p`` (nine-point stencil)."""
    n1, n2 = grid.shape
    d1, d2 = grid.spacing
    ii, jj = np.meshgrid(np.arange(1, n1 - 1), np.arange(1, n2 - 1), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    at = lambda f: np.broadcast_to(f, grid.shape)[ii, jj]
    a11, a22 = at(a[0, 0]), at(a[1, 1])
    a12 = at(a[0, 1]) + at(a[1, 0])
    b1, b2 = at(b[0]), at(b[1])
    cc = at(c) if c is not None else 0.0
    node = lambda i, j: i * n2 + j
    entries = [
        (ii + 1, jj, a11 / d1**2 + b1 / (2 * d1)),
        (ii - 1, jj, a11 / d1**2 - b1 / (2 * d1)),
        (ii, jj + 1, a22 / d2**2 + b2 / (2 * d2)),
        (ii, jj - 1, a22 / d2**2 - b2 / (2 * d2)),
        (ii, jj, -2 * a11 / d1**2 - 2 * a22 / d2**2 + cc),
        (ii + 1, jj + 1, a12 / (4 * d1 * d2)),
        (ii - 1, jj - 1, a12 / (4 * d1 * d2)),
        (ii + 1, jj - 1, -a12 / (4 * d1 * d2)),
        (ii - 1, jj + 1, -a12 / (4 * d1 * d2)),
    ]
    rows = np.concatenate([node(ii, jj)] * len(entries))
    cols = np.concatenate([node(ti, tj) for ti, tj, _ in entries])
    vals = np.concatenate([np.broadcast_to(v, ii.shape) for _, _, v in entries])
    return sp.coo_matrix((vals, (rows, cols)), shape=(grid.size, grid.size)).tocsr()


def dirichlet_system(A, rhs, grid: Grid2D, boundary_values, symmetric=False):
    """Eliminate boundary nodes carrying Dirichlet values from a full-grid operator."""
    unknown = ~grid.boundary_mask
    values = np.zeros(grid.shape)
    values[grid.boundary_mask] = np.broadcast_to(boundary_values, grid.shape)[grid.boundary_mask]
    u = unknown.ravel()
    A = sp.csr_matrix(A)
    A_ii = A[u][:, u]
    b = np.asarray(rhs, float).ravel()[u] - A[u][:, ~u] @ values.ravel()[~u]
    return LinearSystem(matrix=A_ii.tocsr(), rhs=b, unknown=unknown, values=values, symmetric=symmetric)


def solve_sparse(system: LinearSystem, rtol=1e-10):
    """Solve a :class:`LinearSystem`; returns the full node field.

    Systems up to 200^2 unknowns use a sparse LU factorisation; larger
    symmetric systems use Jacobi-preconditioned conjugate gradients.

    Raises
    ------
    SolverDivergence
        If the factorisation is singular or the residual check fails.
    """
    A, b = system.matrix, system.rhs
    n = A.shape[0]
    bnorm = max(np.max(np.abs(b)) if b.size else 0.0, 1e-300)
    if n <= DIRECT_SOLVE_LIMIT or not system.symmetric:
        try:
            lu = spla.splu(A.tocsc(), permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SolverDivergence(f"sparse factorisation failed: {exc}") from None
        diag = np.abs(lu.U.diagonal())
        if diag.min() <= 1e-13 * diag.max():
            raise SolverDivergence("matrix is numerically singular", residual=float("inf"))
        x = lu.solve(b)
        system.info["method"] = "lu"
    else:
        dinv = 1.0 / A.diagonal()
        M = spla.LinearOperator(A.shape, matvec=lambda v: dinv * v)
        iters = [0]

        def count(_):
            iters[0] += 1

        x, flag = spla.cg(A, b, rtol=1e-13, atol=0.0, maxiter=10 * n, M=M, callback=count)
        system.info.update(method="cg", iterations=iters[0])
        if flag != 0:
            raise SolverDivergence(f"conjugate gradients stopped with flag {flag}")
    res = float(np.max(np.abs(A @ x - b))) if n else 0.0
    system.info["residual"] = res
    if not np.all(np.isfinite(x)) or res > rtol * bnorm:
        raise SolverDivergence(f"residual {res:.3e} exceeds {rtol:g} * |b|", residual=res)
    out = system.values.copy()
    out[system.unknown] = x
    return out


# ----------------------------------------------------------------- time stepping
class ImplicitDiffusion:
    """Implicit block ``nu * sum W_lm d_lm v`` for each velocity component.

    ``edge_bc`` maps every edge to ``"dirichlet"`` (value held at the
    prescribed boundary data) or ``"neumann"`` (zero normal gradient,
    second-order one-sided).
    """

    def __init__(self, grid: Grid2D, edge_bc=None):
        self.grid = grid
        self.edge_bc = {e: "dirichlet" for e in EDGES}
        self.edge_bc.update(edge_bc or {})
        for e, kind in self.edge_bc.items():
            if kind not in ("dirichlet", "neumann"):
                raise ConfigInvalid(f"edge condition must be dirichlet or neumann, got {kind!r}", f"bc.edges.{e}")

    def boundary_rows(self):
        """Sparse rows and node mask encoding the lateral conditions."""
        g = self.grid
        n1, n2 = g.shape
        rows, cols, vals = [], [], []
        mask = g.boundary_mask
        kind = np.full(g.shape, "", dtype=object)
        # corners follow the xi1 edges (left/right) to keep one rule per node
        for e in ("bottom", "top", "left", "right"):
            kind[g.edge_mask(e)] = self.edge_bc[e]
        owner = np.full(g.shape, "", dtype=object)
        for e in ("bottom", "top", "left", "right"):
            owner[g.edge_mask(e)] = e
        for i, j in zip(*np.nonzero(mask)):
            r = i * n2 + j
            if kind[i, j] == "dirichlet":
                rows.append(r), cols.append(r), vals.append(1.0)
                continue
            e = owner[i, j]
            if e in ("left", "right"):
                s = 1 if e == "left" else -1
                nb = [(i + s * q, j) for q in range(3)]
            else:
                s = 1 if e == "bottom" else -1
                nb = [(i, j + s * q) for q in range(3)]
            for (pi, pj), w in zip(nb, (3.0, -4.0, 1.0)):
                rows.append(r), cols.append(pi * n2 + pj), vals.append(w)
        B = sp.coo_matrix((vals, (rows, cols)), shape=(g.size, g.size)).tocsr()
        dirichlet = np.zeros(g.shape, bool)
        dirichlet[mask] = kind[mask] == "dirichlet"
        return B, dirichlet

    def system_matrix(self, weight, nu, dt):
        """(I - dt*nu*D) on interior rows, boundary rows from :meth:`boundary_rows`."""
        g = self.grid
        D = nonconservative_matrix(nu * np.asarray(weight), np.zeros((2,) + g.shape), g)
        interior = (~g.boundary_mask).ravel().astype(float)
        A = sp.diags(interior) - dt * D
        B, dirichlet = self.boundary_rows()
        return (A + B).tocsc(), dirichlet

    def _factor(self, weight, nu, dt):
        """LU factors of the stage matrix, reused while weight, nu and dt repeat."""
        w = np.ascontiguousarray(weight, float)
        key = (hashlib.sha1(w.tobytes()).hexdigest(), w.shape, float(nu), float(dt))
        if getattr(self, "_cached", (None,))[0] != key:
            A, dirichlet = self.system_matrix(w, nu, dt)
            self._cached = (key, spla.splu(A, permc_spec="COLAMD"), dirichlet)
        return self._cached[1], self._cached[2]

    def solve(self, weight, nu, dt, rhs_fields, boundary_values):
        """Solve the implicit stage for every component in ``rhs_fields``."""
        lu, dirichlet = self._factor(weight, nu, dt)
        out = np.empty_like(rhs_fields)
        bmask = self.grid.boundary_mask
        for c in range(rhs_fields.shape[0]):
            b = np.array(rhs_fields[c], float)
            b[bmask] = 0.0
            b[dirichlet] = np.broadcast_to(boundary_values[c], self.grid.shape)[dirichlet]
            out[c] = lu.solve(b.ravel()).reshape(self.grid.shape)
        if not np.all(np.isfinite(out)):
            raise SolverDivergence("implicit diffusion solve produced non-finite values")
        return out


def check_cfl(dt, grid: Grid2D, speed):
    """Advective limit ``dt <= 0.5 * min(spacing) / max|speed|``."""
    vmax = float(np.max(np.abs(speed))) if np.size(speed) else 0.0
    if vmax > 0.0 and dt > 0.5 * min(grid.spacing) / vmax:
        raise CFLViolation(
            f"dt={dt:g} exceeds the advective limit {0.5 * min(grid.spacing) / vmax:.4g}"
        )


def time_step_imex(state, t, dt, rhs_explicit, implicit=None):
    """One IMEX step: Heun for the explicit tendency, backward Euler for diffusion.

    Parameters
    ----------
    state : ndarray (ncomp, n1, n2)
    rhs_explicit : callable (state, t) -> tendency of the same shape
    implicit : callable (rhs_fields, t_new) -> fields, optional
        Solves ``(I - dt D) v = rhs`` including lateral conditions.  When
        omitted the step is the explicit Heun scheme.
    """
    k0 = rhs_explicit(state, t)
    stage = state + dt * k0
    if implicit is not None:
        stage = implicit(stage, t + dt)
    k1 = rhs_explicit(stage, t + dt)
    new = state + 0.5 * dt * (k0 + k1)
    if implicit is not None:
        new = implicit(new, t + dt)
    if not np.all(np.isfinite(new)):
        raise SolverDivergence("time step produced non-finite values")
    return new
