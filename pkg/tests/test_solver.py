import warnings

import numpy as np
import pytest

from l1rates.errors import ExhaustedGridError, InvalidParameterError
from l1rates.operators import BidiagonalOperator, DiagonalOperator, HaarIntegrationOperator, MatrixOperator
from l1rates.sequences import SeqVec
from l1rates.solver import (
    ConvergenceWarning,
    SolverConfig,
    discrepancy_select,
    lipschitz_sq_estimate,
    optimality_residual,
    soft_threshold,
    solve_l1_tikhonov,
)

cp = pytest.importorskip("cvxpy")


def qp_oracle(M, y, alpha):
    x = cp.Variable(M.shape[1])
    cp.Problem(cp.Minimize(0.5 * cp.sum_squares(M @ x - y) + alpha * cp.norm1(x))).solve(
        solver=cp.CLARABEL, tol_gap_abs=1e-13, tol_gap_rel=1e-13, tol_feas=1e-13
    )
    return x.value


def certificate_holds(op, y, res, tol):
    N = res.x.dim
    g = op.adjoint_apply(op.apply(res.x) - y, N).values
    x = res.x.values
    on = x != 0
    ok_on = np.all(np.abs(g[on] + res.alpha * np.sign(x[on])) <= 10 * tol)
    ok_off = np.all(np.abs(g[~on]) <= res.alpha + 10 * tol)
    return ok_on and ok_off


class TestSoftThreshold:
    def test_values(self):
        assert soft_threshold(3.0, 1.0) == 2.0
        assert soft_threshold(-0.5, 1.0) == 0.0
        assert np.array_equal(soft_threshold(np.array([-2.0, 0.2]), 0.5), [-1.5, 0.0])

    def test_negative_threshold(self):
        with pytest.raises(InvalidParameterError):
            soft_threshold(1.0, -0.1)


class TestSolve:
    def test_identity_closed_form(self, rng):
        y = SeqVec(rng.normal(size=32))
        op = DiagonalOperator(np.ones(32))
        res = solve_l1_tikhonov(op, y, 0.3, SolverConfig(dim=32))
        assert np.max(np.abs(res.x.values - soft_threshold(y.values, 0.3))) <= 1e-8

    def test_large_alpha_gives_zero(self, rng):
        op = BidiagonalOperator()
        y = SeqVec(rng.normal(size=16))
        amax = np.max(np.abs(op.adjoint_apply(y, 16).values))
        res = solve_l1_tikhonov(op, y, amax * 1.001, SolverConfig(dim=16))
        assert res.x.l1 == 0.0 and res.converged

    def test_qp_oracle_agreement(self):
        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(20):
            M = rng.normal(size=(16, 16)) / 4
            y = rng.normal(size=16)
            alpha = rng.uniform(0.01, 0.5)
            res = solve_l1_tikhonov(MatrixOperator(M), SeqVec(y), alpha, SolverConfig(dim=16))
            worst = max(worst, np.sum(np.abs(res.x.values - qp_oracle(M, y, alpha))))
            assert res.converged
        assert worst <= 1e-6

    @pytest.mark.parametrize("op", [BidiagonalOperator(), HaarIntegrationOperator()], ids=lambda o: o.kind)
    def test_certificate(self, op, rng):
        N = 32
        y = op.apply(SeqVec(1.0 / np.arange(1, N + 1) ** 2)) + op.random_direction(rng, N) * 1e-3
        res = solve_l1_tikhonov(op, y, 1e-4, SolverConfig(dim=N))
        assert res.converged
        assert certificate_holds(op, y, res, 1e-9)
        g = op.adjoint_apply(op.apply(res.x) - y, N).values
        assert optimality_residual(g, res.x.values, res.alpha) <= 10 * 1e-9

    def test_objective_monotone(self, rng):
        op = BidiagonalOperator()
        y = SeqVec(rng.normal(size=64))
        res = solve_l1_tikhonov(op, y, 1e-3, SolverConfig(dim=64))
        tr = np.array(res.objective_trace)
        assert np.all(np.diff(tr) <= 1e-12 * np.maximum(1.0, np.abs(tr[:-1])))

    def test_nonconvergence_warns(self, rng):
        y = SeqVec(rng.normal(size=64))
        with pytest.warns(ConvergenceWarning):
            res = solve_l1_tikhonov(BidiagonalOperator(), y, 1e-7, SolverConfig(dim=64, max_iterations=3, polish=False))
        assert not res.converged

    def test_lipschitz(self):
        op = DiagonalOperator([3.0, 1.0, 0.5])
        assert lipschitz_sq_estimate(op, 3) == pytest.approx(9.0, rel=1e-8)

    def test_bad_alpha(self):
        with pytest.raises(InvalidParameterError):
            solve_l1_tikhonov(BidiagonalOperator(), SeqVec([1.0]), 0.0)


class TestDiscrepancy:
    def test_bracket_identity(self, rng):
        y = SeqVec(rng.normal(size=20))
        op = DiagonalOperator(np.ones(20))
        cfg = SolverConfig(dim=20)
        delta = 0.3
        sel = discrepancy_select(op, y, delta, cfg)

        def closed_res(a):
            return np.linalg.norm(soft_threshold(y.values, a) - y.values)

        assert sel.residual == pytest.approx(closed_res(sel.alpha), abs=1e-8)
        assert sel.residual <= cfg.tau * delta
        assert sel.index > 0 and closed_res(sel.alpha / cfg.q) > cfg.tau * delta

    def test_zero_solution_admissible(self):
        y = SeqVec([0.1, -0.05])
        sel = discrepancy_select(DiagonalOperator([1.0, 1.0]), y, 1.0, SolverConfig(dim=2))
        assert sel.index == 0 and sel.x.l1 == 0.0 and sel.previous_residual is None

    def test_residual_monotone_along_grid(self, rng):
        op = BidiagonalOperator()
        y = op.apply(SeqVec(1.0 / np.arange(1, 65) ** 2)) + SeqVec(rng.normal(size=64)) * 1e-4
        sel = discrepancy_select(op, y, 1e-4, SolverConfig(dim=64))
        res = [r for _, r in sel.trace]
        assert all(a >= b - 1e-9 for a, b in zip(res, res[1:]))

    def test_zero_delta(self):
        with pytest.raises(InvalidParameterError):
            discrepancy_select(BidiagonalOperator(), SeqVec([1.0]), 0.0)

    def test_exhausted(self, rng):
        y = SeqVec(rng.normal(size=8))
        with pytest.raises(ExhaustedGridError) as info:
            discrepancy_select(BidiagonalOperator(), y, 1e-12, SolverConfig(dim=4, count=3))
        assert info.value.best_x.dim == 4 and info.value.best_residual > 0
