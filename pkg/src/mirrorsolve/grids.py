"""Uniform grids, quadrature-weighted functions, and dense integral operators.

Everything downstream (regularizers, forward maps, solvers) lives on the two
grid kinds provided here: the unit interval split into ``n`` subintervals and
the unit square split into ``n x n`` cells.  Inner products and norms are
discretized with the (tensor) trapezoidal rule, and adjoints of discrete
operators are exact adjoints with respect to those weighted inner products,
so adjoint-consistency checks hold to rounding rather than to O(h).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "Grid",
    "GridFunction",
    "DenseOperator",
    "GridMismatchError",
    "inner",
    "norm_l2",
    "norm_l1",
    "norm_linf",
    "add_noise",
    "power_iteration_norm",
]


class GridMismatchError(ValueError):
    """Raised when two grid functions (or an operator and its argument)
    do not live on compatible grids."""


@dataclass(frozen=True)
class Grid:
    """Uniform grid on [0,1] (interval) or [0,1]^2 (square).

    Parameters
    ----------
    kind : str
        Either ``"interval"`` (n subintervals, n+1 nodes) or ``"square"``
        (n x n cells, (n+1)^2 nodes).
    n : int
        Number of subintervals per dimension; must be positive.

    Square-grid node values are stored flat in row-major order with the
    x index fastest: node (i, j) at (i*h, j*h) sits at flat index
    ``j*(n+1) + i``.
    """

    kind: str
    n: int

    def __post_init__(self):
        if self.kind not in ("interval", "square"):
            raise ValueError(f"unknown grid kind {self.kind!r}")
        if self.n < 1:
            raise ValueError("n must be a positive integer")

    @classmethod
    def interval(cls, n: int) -> "Grid":
        return cls("interval", n)

    @classmethod
    def square(cls, n: int) -> "Grid":
        return cls("square", n)

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def node_count(self) -> int:
        m = self.n + 1
        return m if self.kind == "interval" else m * m

    @cached_property
    def nodes_1d(self) -> np.ndarray:
        """Coordinates along one axis (shared by both axes for squares)."""
        x = np.linspace(0.0, 1.0, self.n + 1)
        x.setflags(write=False)
        return x

    @cached_property
    def weights_1d(self) -> np.ndarray:
        w = np.full(self.n + 1, self.h)
        w[0] = w[-1] = 0.5 * self.h
        w.setflags(write=False)
        return w

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoidal quadrature weights aligned with the flat node layout."""
        if self.kind == "interval":
            return self.weights_1d
        w = np.outer(self.weights_1d, self.weights_1d).ravel()
        w.setflags(write=False)
        return w

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        """Flat coordinate arrays: (t,) for intervals, (x, y) for squares."""
        if self.kind == "interval":
            return (self.nodes_1d,)
        x1 = self.nodes_1d
        X, Y = np.meshgrid(x1, x1, indexing="xy")
        x = X.ravel()
        y = Y.ravel()
        x.setflags(write=False)
        y.setflags(write=False)
        return (x, y)

    @cached_property
    def interior_mask(self) -> np.ndarray:
        """Boolean mask of nodes not on the boundary (flat layout)."""
        if self.kind == "interval":
            mask = np.ones(self.n + 1, bool)
            mask[0] = mask[-1] = False
        else:
            m2 = np.zeros((self.n + 1, self.n + 1), bool)
            m2[1:-1, 1:-1] = True
            mask = m2.ravel()
        mask.setflags(write=False)
        return mask

    def function(self, values) -> "GridFunction":
        """Wrap a value array (or scalar, or callable of coords) on this grid."""
        if callable(values):
            values = values(*self.coords)
        arr = np.broadcast_to(np.asarray(values, dtype=float), (self.node_count,))
        return GridFunction(self, np.array(arr))

    def zeros(self) -> "GridFunction":
        return GridFunction(self, np.zeros(self.node_count))

    def ones(self) -> "GridFunction":
        return GridFunction(self, np.ones(self.node_count))


@dataclass(frozen=True)
class GridFunction:
    """Real-valued function sampled at the nodes of a :class:`Grid`.

    Values are frozen at construction; all operations return new instances,
    so grid functions can be shared freely across concurrent runs.
    """

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.node_count,):
            raise GridMismatchError(
                f"expected {self.grid.node_count} values, got shape {v.shape}"
            )
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def wrap(cls, grid: Grid, values: np.ndarray) -> "GridFunction":
        """Take ownership of a freshly computed float array without copying.

        Internal fast path for arithmetic and operator results; callers must
        not hold another writable reference to ``values``.
        """
        gf = object.__new__(cls)
        values.setflags(write=False)
        object.__setattr__(gf, "grid", grid)
        object.__setattr__(gf, "values", values)
        return gf

    def same_grid(self, other: "GridFunction") -> None:
        if self.grid != other.grid:
            raise GridMismatchError("grid functions live on different grids")

    def __add__(self, other):
        self.same_grid(other)
        return GridFunction.wrap(self.grid, self.values + other.values)

    def __sub__(self, other):
        self.same_grid(other)
        return GridFunction.wrap(self.grid, self.values - other.values)

    def __mul__(self, scalar):
        return GridFunction.wrap(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction.wrap(self.grid, -self.values)


def inner(u: GridFunction, v: GridFunction) -> float:
    """Quadrature-weighted L2 pairing sum(w_i u_i v_i)."""
    u.same_grid(v)
    return float(np.sum(u.grid.weights * u.values * v.values))


def norm_l2(u: GridFunction) -> float:
    return float(np.sqrt(np.sum(u.grid.weights * u.values * u.values)))


def norm_l1(u: GridFunction) -> float:
    return float(np.sum(u.grid.weights * np.abs(u.values)))


def norm_linf(u: GridFunction) -> float:
    return float(np.max(np.abs(u.values)))


def add_noise(y: GridFunction, delta: float, seed: int) -> GridFunction:
    """Perturb ``y`` by a Gaussian node vector rescaled to exact L2 norm delta.

    The draw comes from ``numpy.random.default_rng(seed)`` (PCG64), so the
    output is bit-for-bit reproducible for a given ``(delta, seed)``.  A zero
    draw (probability ~0) is retried with the seed incremented.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if delta == 0:
        return y
    s = int(seed)
    while True:
        e = np.random.default_rng(s).standard_normal(y.grid.node_count)
        nrm = np.sqrt(np.sum(y.grid.weights * e * e))
        if nrm > 0:
            break
        s += 1
    return GridFunction.wrap(y.grid, y.values + (delta / nrm) * e)


@dataclass(frozen=True)
class DenseOperator:
    """Dense quadrature-discretized kernel operator between two grids.

    ``apply`` realizes (Ax)(s_i) = sum_j w_j K[i, j] x_j, the trapezoidal
    discretization of an integral operator with kernel values K[i, j] =
    phi(t_j, s_i).  ``adjoint_apply`` is the exact adjoint with respect to
    the weighted inner products on both grids.
    """

    kernel: np.ndarray = field(repr=False)
    grid_in: Grid
    grid_out: Grid

    def __post_init__(self):
        K = np.asarray(self.kernel, dtype=float)
        if K.shape != (self.grid_out.node_count, self.grid_in.node_count):
            raise GridMismatchError(
                f"kernel shape {K.shape} does not match grids "
                f"({self.grid_out.node_count} x {self.grid_in.node_count})"
            )
        K = K.copy()
        K.setflags(write=False)
        object.__setattr__(self, "kernel", K)

    @classmethod
    def from_kernel_fn(cls, phi, grid_in: Grid, grid_out: Grid) -> "DenseOperator":
        """Sample a kernel function phi(t, s) on interval grids."""
        t = grid_in.coords[0]
        s = grid_out.coords[0]
        K = phi(t[None, :], s[:, None])
        K = np.broadcast_to(np.asarray(K, dtype=float),
                            (grid_out.node_count, grid_in.node_count))
        return cls(np.array(K), grid_in, grid_out)

    def apply(self, x: GridFunction) -> GridFunction:
        if x.grid != self.grid_in:
            raise GridMismatchError("operator input grid mismatch")
        return GridFunction.wrap(self.grid_out, self.kernel @ (self.grid_in.weights * x.values))

    def adjoint_apply(self, w: GridFunction) -> GridFunction:
        if w.grid != self.grid_out:
            raise GridMismatchError("operator output grid mismatch")
        return GridFunction.wrap(self.grid_in, self.kernel.T @ (self.grid_out.weights * w.values))

    def norm_estimate(self, iters: int = 200, tol: float = 1e-10, seed: int = 0) -> float:
        return power_iteration_norm(self.apply, self.adjoint_apply,
                                    self.grid_in, iters=iters, tol=tol, seed=seed)


def power_iteration_norm(apply_fn, adjoint_fn, grid_in: Grid, *,
                         iters: int = 200, tol: float = 1e-10, seed: int = 0) -> float:
    """Estimate the L2->L2 operator norm by power iteration on A*A.

    Returns 0.0 for the zero operator.  The iteration stops once the norm
    estimate changes by less than ``tol`` relatively, or after ``iters``
    rounds.
    """
    rng = np.random.default_rng(seed)
    v = GridFunction(grid_in, rng.standard_normal(grid_in.node_count))
    nv = norm_l2(v)
    if nv == 0.0:
        return 0.0
    v = (1.0 / nv) * v
    est = 0.0
    for _ in range(iters):
        av = apply_fn(v)
        z = adjoint_fn(av)
        new_est = norm_l2(av)
        zn = norm_l2(z)
        if zn == 0.0:
            return new_est
        if abs(new_est - est) <= tol * max(new_est, 1e-300):
            return new_est
        est = new_est
        v = (1.0 / zn) * z
    return est
