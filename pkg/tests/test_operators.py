import numpy as np
import pytest

from mirrorsolve import (
    EllipticCoefficient,
    EllipticSolveError,
    EllipticSolver,
    Grid,
    GridFunction,
    GridMismatchError,
    LinearIntegral,
    inner,
    norm_l2,
    power_iteration_norm,
)
from mirrorsolve.checks import (
    check_adjoint_elliptic,
    check_adjoint_entropy_operator,
    check_taylor_elliptic,
    taylor_order,
)
from mirrorsolve.experiments import setup_pde_experiment


class TestLinearIntegral:
    def test_affine_kernel_analytic_image(self):
        g = Grid.interval(5000)
        op = LinearIntegral(g, factors=[(lambda t: np.ones_like(t), lambda s: 1.0 + s),
                                        (lambda t: t, lambda s: np.ones_like(s))])
        out = op.apply(g.ones())
        assert np.max(np.abs(out.values - (1.5 + g.coords[0]))) <= 1e-8

    def test_dense_and_separable_paths_agree(self):
        g = Grid.interval(300)
        dense = LinearIntegral(g, kernel=lambda t, s: 1.0 + t + s)
        sep = LinearIntegral(g, factors=[(lambda t: np.ones_like(t), lambda s: 1.0 + s),
                                         (lambda t: t, lambda s: np.ones_like(s))])
        rng = np.random.default_rng(0)
        for _ in range(10):
            x = GridFunction(g, rng.standard_normal(g.node_count))
            a = dense.apply(x).values
            b = sep.apply(x).values
            assert np.max(np.abs(a - b)) <= 1e-12 * max(1.0, np.max(np.abs(a)))
            w = GridFunction(g, rng.standard_normal(g.node_count))
            a = dense.adjoint_apply(w).values
            b = sep.adjoint_apply(w).values
            assert np.max(np.abs(a - b)) <= 1e-12 * max(1.0, np.max(np.abs(a)))

    def test_derivative_is_operator_itself(self):
        g = Grid.interval(50)
        rng = np.random.default_rng(1)
        op = LinearIntegral.from_matrix(rng.standard_normal((51, 51)), g)
        x = GridFunction(g, rng.standard_normal(51))
        h = GridFunction(g, rng.standard_normal(51))
        assert np.array_equal(op.deriv_apply(x, h).values, op.apply(h).values)

    def test_zero_direction(self):
        g = Grid.interval(30)
        op = LinearIntegral(g, kernel=lambda t, s: np.cos(t * s))
        out = op.deriv_apply(g.ones(), g.zeros())
        assert np.all(out.values == 0.0)

    def test_analytic_norm_bound_passthrough(self):
        g = Grid.interval(200)
        L = np.sqrt(19.0 / 3.0)
        op = LinearIntegral(g, kernel=lambda t, s: 1.0 + t + s, analytic_norm_bound=L)
        assert op.norm_bound() == L

    def test_power_iteration_fallback(self):
        g = Grid.interval(200)
        op = LinearIntegral(g, kernel=lambda t, s: 1.0 + t + s)
        assert op.norm_bound() <= np.sqrt(19.0 / 3.0) + 1e-6
        zero = LinearIntegral.from_matrix(np.zeros((201, 201)), g)
        assert zero.norm_bound() == 0.0

    def test_adjoint_identity_suite(self):
        res = check_adjoint_entropy_operator(n=800)
        assert res.passed, res.detail

    def test_needs_kernel_or_factors(self):
        with pytest.raises(ValueError):
            LinearIntegral(Grid.interval(5))


def _manufactured_setup(n, u_fn, c_fn, f_fn, tol=1e-12):
    grid = Grid.square(n)
    x, y = grid.coords
    u = GridFunction(grid, u_fn(x, y))
    c = GridFunction(grid, c_fn(x, y))
    f = GridFunction(grid, f_fn(x, y))
    op = EllipticCoefficient(f, u, grid, solver=EllipticSolver(grid, tol=tol))
    return op, u, c


class TestEllipticForward:
    def test_benchmark_coefficient_reproduces_quadratic_solution(self):
        # the truth 1 + x^2 + y^2 is quadratic, so the five-point stencil is
        # exact and the discrete solve matches to solver tolerance
        for n in (16, 32):
            setup = setup_pde_experiment(n)
            grid = setup.forward.grid_in
            x, y = grid.coords
            u = GridFunction(grid, 1.0 + x ** 2 + y ** 2)
            assert norm_l2(setup.y - u) <= 1e-8

    def test_zero_coefficient_manufactured_solution(self):
        op, u, c = _manufactured_setup(
            24,
            u_fn=lambda x, y: 1.0 + x ** 2 + y ** 2,
            c_fn=lambda x, y: np.zeros_like(x),
            f_fn=lambda x, y: np.full_like(x, -4.0))
        assert norm_l2(op.apply(c) - u) <= 1e-8

    def test_second_order_convergence_on_curved_solution(self):
        # non-polynomial truth: u = 1 + sin(pi x) sin(pi y), c = 1 + x,
        # f = 2 pi^2 sin sin + c u; the discretization error must shrink at
        # second order under 16 -> 32 -> 64 refinement
        errs = []
        for n in (16, 32, 64):
            op, u, c = _manufactured_setup(
                n,
                u_fn=lambda x, y: 1.0 + np.sin(np.pi * x) * np.sin(np.pi * y),
                c_fn=lambda x, y: 1.0 + x,
                f_fn=lambda x, y: (2.0 * np.pi ** 2 * np.sin(np.pi * x) * np.sin(np.pi * y)
                                   + (1.0 + x) * (1.0 + np.sin(np.pi * x) * np.sin(np.pi * y))))
            errs.append(norm_l2(op.apply(c) - u))
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(orders >= 1.9)
        assert np.all(orders <= 2.1)

    def test_boundary_values_follow_dirichlet_data(self):
        setup = setup_pde_experiment(16)
        grid = setup.forward.grid_in
        u = setup.forward.apply(grid.zeros())
        bd = ~grid.interior_mask
        assert np.array_equal(u.values[bd], setup.forward.g.values[bd])

    def test_zero_direction_and_zero_dual(self):
        setup = setup_pde_experiment(16)
        grid = setup.forward.grid_in
        c = setup.x_true
        assert np.all(setup.forward.deriv_apply(c, grid.zeros()).values == 0.0)
        out = setup.forward.deriv_adjoint_apply(c, grid.zeros())
        assert np.all(out.values == 0.0)

    def test_grid_mismatch_rejected(self):
        setup = setup_pde_experiment(16)
        with pytest.raises(GridMismatchError):
            setup.forward.apply(Grid.square(32).zeros())

    def test_cg_failure_carries_iterations_and_residual(self):
        grid = Grid.square(16)
        solver = EllipticSolver(grid, tol=1e-14, max_iter=2)
        op = EllipticCoefficient(grid.zeros(), grid.zeros(), grid, solver=solver)
        c = GridFunction(grid, np.ones(grid.node_count))
        f = GridFunction(grid, np.ones(grid.node_count))
        op = EllipticCoefficient(f, grid.zeros(), grid, solver=solver)
        with pytest.raises(EllipticSolveError) as exc:
            op.apply(c)
        assert exc.value.iterations >= 1
        assert exc.value.residual > 0


class TestEllipticDerivative:
    def test_adjoint_identity(self):
        res = check_adjoint_elliptic(n=16)
        assert res.passed, res.detail

    def test_taylor_order_window(self):
        res = check_taylor_elliptic()
        assert res.passed, res.detail

    def test_taylor_remainders_decay_monotonically(self):
        _, pts = taylor_order(n=16)
        rems = [r for _, r in pts]
        assert all(rems[i + 1] < rems[i] for i in range(len(rems) - 1))

    def test_tangential_cone_surrogate(self):
        # linearization error within a 0.1-ball of the true coefficient stays
        # below a tenth of the data difference
        rng = np.random.default_rng(8)
        setup = setup_pde_experiment(16, solver_tol=1e-12)
        F = setup.forward
        grid = F.grid_in
        for _ in range(5):
            p1 = rng.standard_normal(grid.node_count)
            p2 = rng.standard_normal(grid.node_count)
            c1 = GridFunction(grid, setup.x_true.values + 0.1 * p1 / norm_l2(GridFunction(grid, p1)))
            c2 = GridFunction(grid, setup.x_true.values + 0.1 * p2 / norm_l2(GridFunction(grid, p2)))
            lhs = norm_l2(F.apply(c1) - F.apply(c2) - F.deriv_apply(c2, c1 - c2))
            rhs = norm_l2(F.apply(c1) - F.apply(c2))
            assert lhs <= 0.1 * rhs

    def test_norm_bound_positive_and_restart_stable(self):
        setup = setup_pde_experiment(16)
        F = setup.forward
        c0 = F.grid_in.zeros()
        e1 = power_iteration_norm(lambda h: F.deriv_apply(c0, h),
                                  lambda w: F.deriv_adjoint_apply(c0, w),
                                  F.grid_in, seed=0)
        e2 = power_iteration_norm(lambda h: F.deriv_apply(c0, h),
                                  lambda w: F.deriv_adjoint_apply(c0, w),
                                  F.grid_in, seed=17)
        assert e1 > 0
        assert abs(e1 - e2) <= 1e-6 * e1
        assert F.norm_bound() == pytest.approx(e1, rel=1e-8)

    def test_state_cache_reuses_solution(self):
        setup = setup_pde_experiment(16)
        F = setup.forward
        c = setup.x_true
        u1 = F.apply(c)
        u2 = F.apply(c)
        assert np.array_equal(u1.values, u2.values)
        # a different coefficient must invalidate the cache
        u3 = F.apply(F.grid_in.zeros())
        assert not np.array_equal(u1.values, u3.values)
