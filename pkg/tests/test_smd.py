import numpy as np
import pytest

from mirrorsolve import (
    ConstantSchedule,
    ConstantStep,
    ElasticNet,
    EntropySimplex,
    Grid,
    GridFunction,
    LinearIntegral,
    MaxIterStop,
    PolynomialSchedule,
    SystemProblem,
    build_sourced_instance,
    run,
    smd_run,
)
from mirrorsolve.smd import validate_schedule, write_rate_csv


class TestSchedules:
    def test_constant_values(self):
        s = ConstantSchedule(0.7)
        assert s.at(0) == s.at(123) == 0.7
        assert s.sup == 0.7

    def test_polynomial_values_and_validation(self):
        s = PolynomialSchedule(gamma0=2.0, alpha=0.5)
        assert s.at(0) == 2.0
        assert s.at(3) == pytest.approx(1.0)
        assert s.sup == 2.0
        with pytest.raises(ValueError):
            PolynomialSchedule(gamma0=1.0, alpha=1.0)

    def test_step_bound_enforced(self):
        # sigma = 1/2: bound is 2 (1 - eta) / L^2
        validate_schedule(ConstantSchedule(1.9), L=1.0)
        with pytest.raises(ValueError):
            validate_schedule(ConstantSchedule(2.1), L=1.0)
        with pytest.raises(ValueError):
            validate_schedule(ConstantSchedule(1.9), L=1.0, eta=0.1)


class TestSourcedInstance:
    def test_solution_solves_system_exactly(self):
        inst = build_sourced_instance(4, 50, EntropySimplex(), seed=7)
        for op, y in zip(inst.problem.operators, inst.problem.data):
            assert np.max(np.abs(op.apply(inst.x_true).values - y.values)) == 0.0

    def test_source_condition_holds_by_construction(self):
        reg = EntropySimplex()
        inst = build_sourced_instance(3, 40, reg, seed=5)
        # xi_true is a subgradient at x_true, so the Bregman distance of the
        # pair to its own primal point vanishes
        assert reg.bregman((inst.x_true, inst.xi_true), inst.x_true) == pytest.approx(0.0, abs=1e-12)
        recon = inst.xi0
        for op, lam in zip(inst.problem.operators, inst.lam_true):
            recon = recon + op.adjoint_apply(lam)
        assert np.max(np.abs(recon.values - inst.xi_true.values)) <= 1e-12

    def test_zero_source_gives_trivial_instance(self):
        reg = EntropySimplex()
        inst = build_sourced_instance(2, 30, reg, seed=3, lam_scale=0.0)
        x0 = reg.mirror_map(inst.xi0)
        assert np.array_equal(inst.x_true.values, x0.values)
        sr = smd_run(inst.problem, reg, ConstantSchedule(1.0), 20, seed=1,
                     x_truth=inst.x_true, xi0=inst.xi0)
        assert all(r.delta_k == 0.0 for r in sr.records)

    def test_blocks_share_input_grid(self):
        g1, g2 = Grid.interval(4), Grid.interval(5)
        op1 = LinearIntegral.from_matrix(np.eye(5), g1)
        op2 = LinearIntegral.from_matrix(np.eye(6), g2)
        with pytest.raises(Exception):
            SystemProblem((op1, op2), (g1.zeros(), g2.zeros()))


class TestSmdRun:
    def test_fixed_point_at_solution(self):
        reg = EntropySimplex()
        inst = build_sourced_instance(3, 30, reg, seed=11)
        sr = smd_run(inst.problem, reg, ConstantSchedule(1.5), 50, seed=2,
                     x_truth=inst.x_true, xi0=inst.xi_true)
        assert np.array_equal(sr.x.values, inst.x_true.values)
        assert all(r.block_residual == 0.0 for r in sr.records if r.block_residual is not None)
        assert all(abs(r.delta_k) <= 1e-12 for r in sr.records)

    def test_two_block_scalar_reference(self):
        # independent replay with explicit loops on a 3-node grid
        reg = EntropySimplex()
        n = 2
        grid = Grid.interval(n)
        w, t = grid.weights, grid.coords[0]
        rng = np.random.default_rng(21)
        K1 = rng.standard_normal((3, 3))
        K2 = rng.standard_normal((3, 3))
        ops = (LinearIntegral.from_matrix(K1, grid), LinearIntegral.from_matrix(K2, grid))
        xT = np.array([0.5, 1.5, 1.0])
        xT = xT / np.sum(w * xT)
        data = tuple(op.apply(GridFunction(grid, xT)) for op in ops)
        prob = SystemProblem(ops, data)
        gamma = 0.9 / prob.norm_bound() ** 2
        seed = 5
        sr = smd_run(prob, reg, ConstantSchedule(gamma), 5, seed=seed)

        picks = np.random.default_rng(seed)
        xi = np.zeros(3)
        x = np.ones(3) / np.sum(w * np.ones(3))
        for k in range(5):
            i = int(picks.integers(2))
            assert sr.records[k].i_k == i
            K = (K1, K2)[i]
            r = np.zeros(3)
            for a in range(3):
                acc = 0.0
                for b in range(3):
                    acc += K[a, b] * w[b] * x[b]
                r[a] = acc - data[i].values[a]
            g = np.zeros(3)
            for b in range(3):
                acc = 0.0
                for a in range(3):
                    acc += K[a, b] * w[a] * r[a]
                g[b] = acc
            xi = xi - gamma * g
            z = np.exp(xi - np.max(xi))
            x = z / np.sum(w * z)
        assert np.max(np.abs(sr.x.values - x)) <= 1e-12

    def test_single_block_matches_deterministic_solver_bitwise(self):
        reg = ElasticNet(beta=0.4)
        inst = build_sourced_instance(1, 30, reg, seed=13)
        op = inst.problem.operators[0]
        y = inst.problem.data[0]
        L = op.norm_bound()
        q = 1.0
        sched = ConstantSchedule(gamma=q / (L * L))
        sr = smd_run(inst.problem, reg, sched, 100, seed=4, x_truth=inst.x_true)
        res = run(op, reg, y, ConstantStep(gamma=q), MaxIterStop(k_max=100),
                  x_truth=inst.x_true)
        assert np.array_equal(sr.x.values, res.x.values)
        assert np.array_equal(sr.xi.values, res.xi.values)
        for rec_s, rec_d in zip(sr.records, res.records):
            if rec_s.block_residual is not None:
                assert rec_s.block_residual == rec_d.residual_norm
            assert rec_s.delta_k == rec_d.bregman_to_truth

    def test_monotone_descent_on_sourced_instance(self):
        reg = EntropySimplex()
        inst = build_sourced_instance(4, 50, reg, seed=7)
        for seed in (1, 2, 3):
            sr = smd_run(inst.problem, reg, ConstantSchedule(1.8), 500, seed=seed,
                         x_truth=inst.x_true)
            deltas = [r.delta_k for r in sr.records]
            assert all(deltas[i + 1] <= deltas[i] + 1e-12 for i in range(len(deltas) - 1))

    def test_schedule_validated_before_running(self):
        reg = EntropySimplex()
        inst = build_sourced_instance(2, 20, reg, seed=1)
        L = inst.problem.norm_bound()
        with pytest.raises(ValueError):
            smd_run(inst.problem, reg, ConstantSchedule(2.5 / (L * L)), 10, seed=0)

    def test_polynomial_partial_sums_and_decay(self):
        reg = EntropySimplex()
        inst = build_sourced_instance(4, 50, reg, seed=7)
        sched = PolynomialSchedule(gamma0=1.8, alpha=0.5)
        k_max = 10_000
        sr = smd_run(inst.problem, reg, sched, k_max, seed=3, x_truth=inst.x_true)
        # partial-sum oracle by direct summation
        expected = np.cumsum([sched.gamma0 * (k + 1) ** (-0.5) for k in range(k_max + 1)])
        got = np.array([r.s_k for r in sr.records])
        assert np.max(np.abs(got - expected)) <= 1e-10 * expected[-1]
        # s_k ~ 2 gamma0 sqrt(k): the ratio approaches 2 gamma0 from below
        assert got[-1] / np.sqrt(k_max) == pytest.approx(2.0 * sched.gamma0, rel=0.02)
        # with s_k ~ sqrt(k) the distance decays roughly like k^(-1/2); fit
        # past the transient (band is generous: the window is finite)
        ks = np.array([r.k for r in sr.records if r.k >= 300])
        ds = np.array([r.delta_k for r in sr.records if r.k >= 300])
        slope = np.polyfit(np.log(ks), np.log(ds), 1)[0]
        assert -0.7 <= slope <= -0.3

    def test_sampling_uniformity(self):
        reg = EntropySimplex()
        inst = build_sourced_instance(4, 4, reg, seed=2)
        sr = smd_run(inst.problem, reg, ConstantSchedule(1.5), 100_000, seed=9)
        picks = np.array([r.i_k for r in sr.records if r.i_k is not None])
        counts = np.bincount(picks, minlength=4)
        expect = len(picks) / 4.0
        sigma = np.sqrt(len(picks) * 0.25 * 0.75)
        assert np.all(np.abs(counts - expect) <= 3.0 * sigma)

    def test_determinism_per_seed(self):
        reg = ElasticNet(beta=0.3)
        inst = build_sourced_instance(3, 25, reg, seed=4)
        a = smd_run(inst.problem, reg, ConstantSchedule(1.0), 200, seed=42,
                    x_truth=inst.x_true)
        b = smd_run(inst.problem, reg, ConstantSchedule(1.0), 200, seed=42,
                    x_truth=inst.x_true)
        assert np.array_equal(a.x.values, b.x.values)
        assert a.records == b.records

    def test_dual_identity_maintained_blockwise(self):
        # replaying the pick stream with per-block multipliers must keep
        # xi_k = xi0 + sum_i A_i^* lam_i within rounding
        reg = EntropySimplex()
        inst = build_sourced_instance(3, 20, reg, seed=6)
        sched = ConstantSchedule(1.2)
        k_max = 200
        sr = smd_run(inst.problem, reg, sched, k_max, seed=12)
        ops = inst.problem.operators
        grid = inst.problem.grid_in
        lams = [np.zeros(grid.node_count) for _ in ops]
        x = reg.mirror_map(inst.xi0)
        for k in range(k_max):
            i = sr.records[k].i_k
            gamma = sr.records[k].gamma_k
            r = ops[i].apply(x) - inst.problem.data[i]
            lams[i] = lams[i] - gamma * r.values
            xi = inst.xi0
            for op, lam in zip(ops, lams):
                xi = xi + op.adjoint_apply(GridFunction(grid, lam))
            x = reg.mirror_map(xi)
        assert np.max(np.abs(xi.values - sr.xi.values)) <= 1e-10 * (1 + np.max(np.abs(xi.values)))


class TestRateCsv:
    def test_format(self, tmp_path):
        reg = EntropySimplex()
        inst = build_sourced_instance(2, 20, reg, seed=1)
        sr = smd_run(inst.problem, reg, ConstantSchedule(1.0), 5, seed=3,
                     x_truth=inst.x_true)
        p = tmp_path / "rate.csv"
        write_rate_csv(sr, p)
        lines = p.read_text().splitlines()
        assert lines[0] == "k,i_k,gamma_k,s_k,delta_k,s_k_delta_k"
        assert len(lines) == 7
        assert lines[-1].split(",")[1] == ""  # final record has no pick
