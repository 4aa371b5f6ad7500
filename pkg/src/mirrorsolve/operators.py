"""Forward operators: dense integral operators and an elliptic coefficient map.

Two families are provided:

* :class:`LinearIntegral` -- first-kind integral operator on the interval,
  (Ax)(s) = int_0^1 phi(t, s) x(t) dt, discretized with trapezoidal weights.
  The kernel is materialized as a dense matrix by default; kernels with a
  known separable expansion phi(t, s) = sum_p a_p(t) b_p(s) can instead be
  applied in O(n) through their moments, which is numerically equivalent and
  keeps long solver runs on fine grids cheap.

* :class:`EllipticCoefficient` -- the nonlinear map c -> u(c) where u solves
  -Lap(u) + c u = f on the unit square with Dirichlet data g, discretized by
  the five-point stencil and solved with diagonally preconditioned CG.  The
  derivative and its adjoint follow the usual sensitivity formulas
  F'(c) h = -A(c)^{-1} (h u(c)) and F'(c)* w = -u(c) A(c)^{-1} w, with
  homogeneous Dirichlet conditions on the auxiliary solves; on the interior
  of the tensor-trapezoidal grid these are exact discrete adjoints.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grids import (
    DenseOperator,
    Grid,
    GridFunction,
    GridMismatchError,
    power_iteration_norm,
)

__all__ = [
    "ForwardOperator",
    "LinearIntegral",
    "EllipticCoefficient",
    "EllipticSolver",
    "EllipticSolveError",
]


class ForwardOperator:
    """Common surface: apply, derivative-apply, derivative-adjoint-apply."""

    linear: bool = False
    grid_in: Grid
    grid_out: Grid

    def apply(self, x: GridFunction) -> GridFunction:
        raise NotImplementedError

    def deriv_apply(self, x: GridFunction, h: GridFunction) -> GridFunction:
        raise NotImplementedError

    def deriv_adjoint_apply(self, x: GridFunction, w: GridFunction) -> GridFunction:
        raise NotImplementedError

    def norm_bound(self) -> float:
        """Upper bound (or estimate) for sup ||F'(x)||; see subclasses."""
        raise NotImplementedError


class LinearIntegral(ForwardOperator):
    """Linear integral operator with trapezoidal quadrature.

    Parameters
    ----------
    grid_in, grid_out : Grid
        Interval grids for argument and image (``grid_out`` defaults to
        ``grid_in``).
    kernel : callable or array, optional
        Kernel phi(t, s) as a vectorized callable or a dense matrix of
        samples K[i, j] = phi(t_j, s_i).  Materialized densely.
    factors : sequence of (a, b) pairs, optional
        Separable expansion phi(t, s) = sum_p a_p(t) b_p(s); each entry is a
        pair of callables (or node arrays) on the input/output grid.  When
        given, application uses the O(n) moment form and no dense matrix is
        stored.
    analytic_norm_bound : float, optional
        Known bound L with ||A|| <= L; when absent, ``norm_bound`` falls back
        to a power-iteration estimate.
    """

    linear = True

    def __init__(self, grid_in: Grid, grid_out: Grid = None, *, kernel=None,
                 factors=None, analytic_norm_bound: float = None):
        self.grid_in = grid_in
        self.grid_out = grid_out if grid_out is not None else grid_in
        self._analytic_bound = analytic_norm_bound
        self._norm_cache = None
        self._dense = None
        self._factors = None
        if factors is not None:
            t = self.grid_in.coords[0]
            s = self.grid_out.coords[0]
            self._factors = [
                (np.asarray(a(t) if callable(a) else np.broadcast_to(a, t.shape), float),
                 np.asarray(b(s) if callable(b) else np.broadcast_to(b, s.shape), float))
                for a, b in factors
            ]
        elif kernel is not None:
            if callable(kernel):
                self._dense = DenseOperator.from_kernel_fn(kernel, self.grid_in, self.grid_out)
            else:
                self._dense = DenseOperator(np.asarray(kernel, float), self.grid_in, self.grid_out)
        else:
            raise ValueError("provide either kernel or factors")

    @classmethod
    def from_matrix(cls, K, grid_in: Grid, grid_out: Grid = None) -> "LinearIntegral":
        return cls(grid_in, grid_out, kernel=K)

    def apply(self, x: GridFunction) -> GridFunction:
        if x.grid != self.grid_in:
            raise GridMismatchError("operator input grid mismatch")
        if self._factors is not None:
            w = self.grid_in.weights
            out = np.zeros(self.grid_out.node_count)
            for a, b in self._factors:
                out += b * np.sum(w * a * x.values)
            return GridFunction.wrap(self.grid_out, out)
        return self._dense.apply(x)

    def adjoint_apply(self, w: GridFunction) -> GridFunction:
        if w.grid != self.grid_out:
            raise GridMismatchError("operator output grid mismatch")
        if self._factors is not None:
            wq = self.grid_out.weights
            out = np.zeros(self.grid_in.node_count)
            for a, b in self._factors:
                out += a * np.sum(wq * b * w.values)
            return GridFunction.wrap(self.grid_in, out)
        return self._dense.adjoint_apply(w)

    def deriv_apply(self, x: GridFunction, h: GridFunction) -> GridFunction:
        return self.apply(h)

    def deriv_adjoint_apply(self, x: GridFunction, w: GridFunction) -> GridFunction:
        return self.adjoint_apply(w)

    def norm_bound(self) -> float:
        if self._analytic_bound is not None:
            return self._analytic_bound
        if self._norm_cache is None:
            self._norm_cache = power_iteration_norm(
                self.apply, self.adjoint_apply, self.grid_in)
        return self._norm_cache


class EllipticSolveError(RuntimeError):
    """Conjugate-gradient failure; carries the iteration count and residual."""

    def __init__(self, iterations: int, residual: float):
        super().__init__(
            f"CG did not converge after {iterations} iterations "
            f"(relative residual {residual:.3e})")
        self.iterations = iterations
        self.residual = residual


@dataclass
class EllipticSolver:
    """Five-point Dirichlet solver on the unit square via preconditioned CG.

    Assembles the interior-node Laplacian once; each solve adds diag(c) and
    runs CG with the Jacobi preconditioner until the algebraic residual drops
    below ``tol * ||rhs||`` (atol 0).  ``max_iter`` defaults to 10 n^2.
    """

    grid: Grid
    tol: float = 1e-10
    max_iter: int = None
    _lap: sp.csr_matrix = field(init=False, repr=False, default=None)

    def __post_init__(self):
        if self.grid.kind != "square":
            raise ValueError("elliptic solver requires a square grid")
        n = self.grid.n
        if n < 2:
            raise ValueError("square grid must have n >= 2 for interior nodes")
        if self.max_iter is None:
            self.max_iter = 10 * n * n
        h = self.grid.h
        ni = n - 1
        I = sp.eye(ni, format="csr")
        T = sp.diags([-np.ones(ni - 1), 2.0 * np.ones(ni), -np.ones(ni - 1)],
                     [-1, 0, 1], format="csr")
        self._lap = ((sp.kron(I, T) + sp.kron(T, I)) / (h * h)).tocsr()

    def matrix(self, c_interior: np.ndarray) -> sp.csr_matrix:
        return self._lap + sp.diags(c_interior)

    def solve(self, A: sp.csr_matrix, rhs: np.ndarray) -> np.ndarray:
        count = [0]

        def cb(_):
            count[0] += 1

        u, info = spla.cg(A, rhs, rtol=self.tol, atol=0.0,
                          maxiter=self.max_iter,
                          M=sp.diags(1.0 / A.diagonal()), callback=cb)
        if info != 0:
            bn = np.linalg.norm(rhs)
            rel = np.linalg.norm(rhs - A @ u) / bn if bn > 0 else 0.0
            raise EllipticSolveError(count[0], rel)
        return u


class EllipticCoefficient(ForwardOperator):
    """Coefficient-to-solution map for -Lap(u) + c u = f, u = g on the boundary.

    ``f`` and ``g`` are grid functions on the (square) grid; only the
    boundary values of ``g`` enter.  ``apply(c)`` returns the full-grid
    solution (boundary nodes carry g); the derivative solves use homogeneous
    Dirichlet conditions and vanish on the boundary, so the map has no
    sensitivity to boundary values of c.  Iterates are expected to satisfy
    c >= 0 node-wise (the solver module guarantees this by applying the
    mirror map before every call); mildly negative values are tolerated as
    long as the shifted operator stays positive definite.

    The factorization state (matrix, solution) for the most recent c is
    cached so residual and gradient evaluations at the same iterate share
    one assembly; the cache is a single slot guarded by a lock, and a miss
    only costs recomputation.
    """

    linear = False

    def __init__(self, f: GridFunction, g: GridFunction, grid: Grid,
                 solver: EllipticSolver = None):
        if f.grid != grid or g.grid != grid:
            raise GridMismatchError("f and g must live on the operator grid")
        self.grid_in = grid
        self.grid_out = grid
        self.f = f
        self.g = g
        self.solver = solver if solver is not None else EllipticSolver(grid)
        m = grid.n + 1
        self._shape = (m, m)
        gv = g.values.reshape(self._shape)
        lift = np.zeros((m - 2, m - 2))
        lift[:, 0] += gv[1:-1, 0]
        lift[:, -1] += gv[1:-1, -1]
        lift[0, :] += gv[0, 1:-1]
        lift[-1, :] += gv[-1, 1:-1]
        self._g_lift = lift.ravel() / grid.h ** 2
        self._f_int = f.values.reshape(self._shape)[1:-1, 1:-1].ravel()
        self._state_lock = threading.Lock()
        self._state = None  # (c_bytes, matrix, u_full_values)
        self._norm_cache = None

    def _interior(self, u: GridFunction) -> np.ndarray:
        return u.values.reshape(self._shape)[1:-1, 1:-1].ravel()

    def _embed(self, interior: np.ndarray, boundary: GridFunction = None) -> np.ndarray:
        m = self._shape[0]
        full = np.zeros(self._shape) if boundary is None else boundary.values.reshape(self._shape).copy()
        full[1:-1, 1:-1] = interior.reshape(m - 2, m - 2)
        return full.ravel()

    def _solve_state(self, c: GridFunction):
        key = c.values.tobytes()
        with self._state_lock:
            state = self._state
        if state is not None and state[0] == key:
            return state[1], state[2]
        A = self.solver.matrix(self._interior(c))
        u_int = self.solver.solve(A, self._f_int + self._g_lift)
        u_full = self._embed(u_int, boundary=self.g)
        with self._state_lock:
            self._state = (key, A, u_full)
        return A, u_full

    def apply(self, c: GridFunction) -> GridFunction:
        if c.grid != self.grid_in:
            raise GridMismatchError("coefficient grid mismatch")
        _, u_full = self._solve_state(c)
        return GridFunction.wrap(self.grid_out, u_full)

    def deriv_apply(self, c: GridFunction, h: GridFunction) -> GridFunction:
        c.same_grid(h)
        A, u_full = self._solve_state(c)
        rhs = -(h.values * u_full).reshape(self._shape)[1:-1, 1:-1].ravel()
        v_int = self.solver.solve(A, rhs)
        return GridFunction.wrap(self.grid_out, self._embed(v_int))

    def deriv_adjoint_apply(self, c: GridFunction, w: GridFunction) -> GridFunction:
        if w.grid != self.grid_out:
            raise GridMismatchError("output grid mismatch")
        A, u_full = self._solve_state(c)
        z_int = self.solver.solve(A, self._interior(w))
        return GridFunction.wrap(self.grid_in, -u_full * self._embed(z_int))

    def norm_bound(self, at: GridFunction = None) -> float:
        """Power-iteration estimate of ||F'(c)|| (default c = 0)."""
        if at is None:
            if self._norm_cache is not None:
                return self._norm_cache
            at = self.grid_in.zeros()
            self._norm_cache = power_iteration_norm(
                lambda h: self.deriv_apply(at, h),
                lambda w: self.deriv_adjoint_apply(at, w),
                self.grid_in)
            return self._norm_cache
        return power_iteration_norm(
            lambda h: self.deriv_apply(at, h),
            lambda w: self.deriv_adjoint_apply(at, w),
            self.grid_in)
