"""Unit tests for the recovery programs."""

from __future__ import annotations

import numpy as np
import pytest

from src.certificates import search_certificate_lp
from src.harness import build_instance
from src.models import BinarySignal, ExperimentConfig, SolverOptions, SolverStatus
from src.operators import apply, apply_adjoint, make_circulant, to_dense
from src.solvers import (
    estimate_lipschitz,
    projected_gradient_norm,
    round_to_binary,
    solve_box_bp,
    solve_box_ls,
    solve_nonneg_bp,
    solve_program,
)


def _identity(n):
    b = np.zeros(n)
    b[0] = 1.0
    return make_circulant(b, range(n))


def _gaussian_instance(seed, n, m, s, mu=1.0):
    rng = np.random.default_rng(seed)
    theta = rng.choice(n, size=m, replace=False)
    op = make_circulant(rng.standard_normal(n), theta, mu)
    x0 = BinarySignal.from_support(n, rng.choice(n, size=s, replace=False))
    return op, x0


class TestIdentityOperator:
    """Every program recovers x0 when A is the identity."""

    x0 = BinarySignal.from_support(6, [1, 4])

    @pytest.mark.parametrize("program", ["bp", "bp+"])
    def test_basis_pursuit(self, program):
        """Both basis-pursuit programs return x0 exactly."""
        op = _identity(6)
        outcome = solve_program(program, op, apply(op, self.x0.values))
        assert outcome.status is SolverStatus.OPTIMAL
        assert outcome.error_to(self.x0) <= 1e-9

    def test_least_squares(self):
        """Box LS converges to x0."""
        op = _identity(6)
        outcome = solve_box_ls(op, apply(op, self.x0.values))
        assert outcome.status is SolverStatus.OPTIMAL
        assert outcome.error_to(self.x0) <= 1e-6

    def test_zero_measurements(self):
        """y = 0 under a centered operator gives x = 0."""
        op = _identity(5)
        outcome = solve_box_bp(op, np.zeros(5))
        np.testing.assert_allclose(outcome.x_star, 0.0, atol=1e-12)


class TestBoxPrograms:
    """Test feasibility and optimality on random instances."""

    def test_bp_objective_below_truth(self):
        """x0 is feasible, so the BP optimum is at most s."""
        op, x0 = _gaussian_instance(3, 16, 10, 3)
        outcome = solve_box_bp(op, apply(op, x0.values))
        assert outcome.status is SolverStatus.OPTIMAL
        assert outcome.objective <= x0.s + 1e-7
        assert np.all(outcome.x_star >= 0.0) and np.all(outcome.x_star <= 1.0)
        assert outcome.residual_l2 <= 1e-7

    def test_ls_stays_in_box(self):
        """Inconsistent measurements still give a point in the box."""
        op, x0 = _gaussian_instance(4, 16, 10, 5)
        y = apply(op, x0.values) + 0.5
        outcome = solve_box_ls(op, y)
        assert np.all(outcome.x_star >= 0.0) and np.all(outcome.x_star <= 1.0)

    def test_ls_fits_consistent_measurements(self):
        """Consistent measurements are fitted to near-zero residual."""
        op, x0 = _gaussian_instance(5, 16, 10, 4)
        outcome = solve_box_ls(op, apply(op, x0.values))
        assert outcome.status is SolverStatus.OPTIMAL
        assert outcome.residual_l2 <= 1e-4

    def test_nonneg_bp_infeasible(self):
        """Positive entries cannot produce a negative measurement with x >= 0."""
        op = make_circulant([1.0, 2.0, 3.0, 4.0], range(4), mu=1.0)
        outcome = solve_nonneg_bp(op, -np.ones(4))
        assert outcome.status is SolverStatus.INFEASIBLE

    def test_zero_operator(self):
        """A zero operator returns x = 0 immediately."""
        op = make_circulant(np.zeros(4), [0, 1])
        outcome = solve_box_ls(op, np.zeros(2))
        assert outcome.status is SolverStatus.OPTIMAL
        np.testing.assert_array_equal(outcome.x_star, 0.0)

    def test_certificate_implies_recovery(self):
        """Whenever a certificate exists, BP and LS both recover x0."""
        found = 0
        for seed in range(20):
            op, x0 = _gaussian_instance(seed, 10, 7, 2)
            search = search_certificate_lp(op, x0.support)
            if search is None:
                continue
            found += 1
            y = apply(op, x0.values)
            assert solve_box_bp(op, y).error_to(x0) <= 1e-6
            assert solve_box_ls(op, y).error_to(x0) <= 1e-4
        assert found >= 1


class TestLeastSquaresStopping:
    """Test that box LS stops on the unscaled projected-gradient norm."""

    def test_projected_gradient_zero_at_truth(self):
        """Consistent binary ground truth is a stationary point."""
        op, x0 = _gaussian_instance(11, 20, 12, 6)
        assert projected_gradient_norm(op, x0.values, apply(op, x0.values)) == pytest.approx(0.0, abs=1e-9)

    def test_projected_gradient_ignores_blocked_directions(self):
        """At x = 0 a positive gradient points out of the box and contributes nothing."""
        op = _identity(3)
        assert projected_gradient_norm(op, np.zeros(3), -np.ones(3)) == 0.0
        assert projected_gradient_norm(op, np.zeros(3), np.array([0.5, 0.0, 0.0])) == pytest.approx(0.5)

    def test_optimal_status_meets_tolerance(self):
        """Large ||A*y|| (mu = 1, N = 100) must not loosen the stopping rule."""
        config = ExperimentConfig(n=100, s_values=(50,), m_values=(60,), trials=1)
        inst = build_instance(config, 50, 60, 0)
        assert np.linalg.norm(apply_adjoint(inst.op, inst.y)) > 1e3
        opts = SolverOptions()
        outcome = solve_box_ls(inst.op, inst.y, opts)
        if outcome.optimal:
            assert projected_gradient_norm(inst.op, outcome.x_star, inst.y) <= opts.tolerance_opt

    def test_small_margin_instances_recover(self):
        """N = 10 instances at s = 4, M = 8 recover with LS whenever a certificate exists."""
        config = ExperimentConfig(n=10, s_values=(4,), m_values=(8,), trials=10)
        certified = 0
        for trial in range(10):
            inst = build_instance(config, 4, 8, trial)
            if search_certificate_lp(inst.op, inst.x0.support) is None:
                continue
            certified += 1
            outcome = solve_box_ls(inst.op, inst.y)
            assert outcome.optimal
            assert outcome.error_to(inst.x0) <= 1e-4
        assert certified >= 1


class TestHelpers:
    """Test dispatch, validation, Lipschitz estimate and rounding."""

    def test_unknown_program(self):
        """Dispatch rejects unknown program names."""
        with pytest.raises(ValueError, match="unknown program"):
            solve_program("l1", _identity(3), np.zeros(3))

    def test_wrong_measurement_length(self):
        """y must have one entry per selected row."""
        with pytest.raises(ValueError, match="length M=3"):
            solve_box_bp(_identity(3), np.zeros(4))

    def test_lipschitz_estimate(self):
        """Power iteration brackets the top eigenvalue of A^T A."""
        op, _ = _gaussian_instance(7, 20, 12, 0)
        dense = to_dense(op)
        true = float(np.linalg.eigvalsh(dense.T @ dense).max())
        estimate = estimate_lipschitz(op)
        assert 0.95 * true <= estimate <= 1.01 * true * (1 + 1e-9)

    def test_round_exact(self):
        """Rounding the truth reproduces the measurements."""
        op, x0 = _gaussian_instance(8, 12, 8, 3)
        result = round_to_binary(x0.values, op, apply(op, x0.values))
        assert result.consistent
        assert result.signal == x0

    def test_round_ties_down(self):
        """Entries exactly at 1/2 round to zero."""
        op = _identity(4)
        result = round_to_binary(np.full(4, 0.5), op, np.zeros(4))
        np.testing.assert_array_equal(result.signal.values, 0.0)
        assert result.consistent

    def test_round_small_perturbation(self):
        """Small perturbations round back to x0."""
        op, x0 = _gaussian_instance(9, 12, 8, 3)
        noisy = x0.values + 1e-5 * np.random.default_rng(0).standard_normal(12)
        result = round_to_binary(noisy, op, apply(op, x0.values))
        assert result.signal == x0
        assert result.consistent

    def test_round_inconsistent(self):
        """A rounded point that misses y is flagged."""
        op = _identity(3)
        result = round_to_binary(np.array([1.0, 0.0, 0.0]), op, np.zeros(3))
        assert not result.consistent
        assert result.residual_l2 == pytest.approx(1.0)
