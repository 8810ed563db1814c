"""Tests for the dense operator-splitting QP solver."""

import numpy as np
import pytest

from gdpc.errors import ShapeError
from gdpc.qp import (
    QpProblem,
    QpSettings,
    condition_report,
    l1_epigraph,
    solve,
)


def kkt_oracle(p, q, a, b):
    """Direct equality-constrained KKT solve: [[P, A'],[A, 0]]."""
    n, m = p.shape[0], a.shape[0]
    kkt = np.block([[p, a.T], [a, np.zeros((m, m))]])
    sol = np.linalg.solve(kkt, np.concatenate([-q, b]))
    return sol[:n], sol[n:]


def random_equality_qp(rng, n=10, m=3):
    b_mat = rng.standard_normal((n, n))
    p = b_mat @ b_mat.T + 0.5 * np.eye(n)
    q = rng.standard_normal(n)
    a = rng.standard_normal((m, n))
    b = rng.standard_normal(m)
    return QpProblem(P=p, q=q, A_eq=a, b_eq=b)


class TestBasicSolves:
    def test_unconstrained_scalar(self):
        # min 0.5 x^2 - x  ->  x = 1, objective -0.5.
        sol = solve(QpProblem(P=[[1.0]], q=[-1.0]))
        assert sol.status == "optimal"
        assert np.isclose(sol.x[0], 1.0, atol=1e-8)
        assert np.isclose(sol.objective, -0.5, atol=1e-8)

    def test_active_lower_bound(self):
        sol = solve(QpProblem(P=[[1.0]], q=[0.0], lower=[2.0]))
        assert sol.status == "optimal"
        assert np.isclose(sol.x[0], 2.0, atol=1e-8)

    def test_matches_kkt_oracle(self):
        rng = np.random.default_rng(1)
        prob = random_equality_qp(rng)
        x_ref, _ = kkt_oracle(prob.P, prob.q, prob.A_eq, prob.b_eq)
        sol = solve(prob)
        assert sol.status == "optimal"
        assert np.max(np.abs(sol.x - x_ref)) < 1e-6

    def test_kkt_oracle_sweep(self):
        # 200 random strictly convex equality-constrained instances.
        rng = np.random.default_rng(2)
        worst = 0.0
        for _ in range(200):
            n = int(rng.integers(2, 12))
            m = int(rng.integers(1, n))
            prob = random_equality_qp(rng, n=n, m=m)
            x_ref, _ = kkt_oracle(prob.P, prob.q, prob.A_eq, prob.b_eq)
            sol = solve(prob)
            assert sol.status == "optimal"
            worst = max(worst, float(np.max(np.abs(sol.x - x_ref))))
        assert worst < 1e-6

    def test_stationarity_with_recovered_multipliers(self):
        rng = np.random.default_rng(3)
        prob = QpProblem(
            P=np.diag([1.0, 2.0, 0.5]),
            q=rng.standard_normal(3),
            A_eq=[[1.0, 1.0, 1.0]],
            b_eq=[1.0],
            lower=[-0.2, -0.2, -0.2],
            upper=[0.8, 0.8, 0.8],
        )
        sol = solve(prob)
        assert sol.status == "optimal"
        grad = prob.P @ sol.x + prob.q + prob.A_eq.T @ sol.eq_duals + sol.bound_duals
        scale = max(1.0, float(np.max(np.abs(prob.q))))
        assert np.max(np.abs(grad)) < 1e-5 * scale

    def test_scaling_invariance_of_argmin(self):
        rng = np.random.default_rng(4)
        prob = random_equality_qp(rng, n=6, m=2)
        sol = solve(prob)
        scaled = QpProblem(
            P=7.5 * prob.P, q=7.5 * prob.q, A_eq=prob.A_eq, b_eq=prob.b_eq
        )
        sol_scaled = solve(scaled)
        assert np.max(np.abs(sol.x - sol_scaled.x)) < 1e-6

    def test_box_only_projection(self):
        # min 0.5||x - c||^2 inside a box is the clipped center.
        rng = np.random.default_rng(5)
        c = rng.standard_normal(6) * 2.0
        prob = QpProblem(
            P=np.eye(6), q=-c, lower=-np.ones(6), upper=np.ones(6)
        )
        sol = solve(prob)
        assert np.max(np.abs(sol.x - np.clip(c, -1, 1))) < 1e-7

    def test_pinned_variable_via_equal_bounds(self):
        prob = QpProblem(
            P=np.eye(3), q=np.array([1.0, -2.0, 0.5]),
            lower=np.array([0.3, -np.inf, -1.0]),
            upper=np.array([0.3, np.inf, 1.0]),
        )
        sol = solve(prob)
        assert sol.status == "optimal"
        assert np.allclose(sol.x, [0.3, 2.0, -0.5], atol=1e-8)

    def test_semidefinite_cost_with_equalities(self):
        # Flat directions pinned by constraints only.
        prob = QpProblem(
            P=np.diag([1.0, 0.0]),
            q=[0.0, 1.0],
            A_eq=[[0.0, 1.0]],
            b_eq=[2.0],
        )
        sol = solve(prob)
        assert sol.status == "optimal"
        assert np.allclose(sol.x, [0.0, 2.0], atol=1e-7)


class TestInfeasibility:
    def test_conflicting_equalities(self):
        prob = QpProblem(
            P=np.eye(1), q=[0.0], A_eq=[[1.0], [1.0]], b_eq=[0.0, 1.0]
        )
        sol = solve(prob)
        assert sol.status == "infeasible"

    def test_equality_outside_box(self):
        prob = QpProblem(
            P=np.eye(2), q=[0.0, 0.0],
            A_eq=[[1.0, 1.0]], b_eq=[10.0],
            lower=[-1.0, -1.0], upper=[1.0, 1.0],
        )
        sol = solve(prob)
        assert sol.status == "infeasible"


class TestL1Epigraph:
    def test_soft_threshold(self):
        # min 0.5 (x-3)^2 + |x|  ->  x = 2 (shrink by the weight).
        base = QpProblem(P=[[1.0]], q=[-3.0])
        aug, idx = l1_epigraph(base, weight=1.0, selector=[0])
        sol = solve(aug)
        assert sol.status == "optimal"
        assert np.isclose(sol.x[idx][0], 2.0, atol=1e-6)

    def test_zero_weight_recovers_original(self):
        rng = np.random.default_rng(6)
        base = random_equality_qp(rng, n=5, m=2)
        ref = solve(base)
        aug, idx = l1_epigraph(base, weight=0.0, selector=np.arange(5))
        sol = solve(aug)
        assert np.max(np.abs(sol.x[idx] - ref.x)) < 1e-6

    def test_pure_l1_with_bound(self):
        # min |x| s.t. x >= 1  ->  x = 1.
        base = QpProblem(P=[[0.0]], q=[0.0], lower=[1.0])
        aug, idx = l1_epigraph(base, weight=1.0, selector=[0])
        sol = solve(aug)
        assert sol.status == "optimal"
        assert np.isclose(sol.x[idx][0], 1.0, atol=1e-6)

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            l1_epigraph(QpProblem(P=[[1.0]], q=[0.0]), weight=-1.0, selector=[0])


class TestConditionReport:
    def test_identity(self):
        rep = condition_report(QpProblem(P=np.eye(3), q=np.zeros(3)))
        assert np.isclose(rep.lambda_min, 1.0)
        assert np.isclose(rep.lambda_max, 1.0)
        assert rep.eq_rank == 0

    def test_zero_cost(self):
        rep = condition_report(QpProblem(P=np.zeros((2, 2)), q=np.zeros(2)))
        assert np.isclose(rep.lambda_min, 0.0)
        assert np.isclose(rep.lambda_max, 0.0)

    def test_equality_rank(self):
        rep = condition_report(
            QpProblem(
                P=np.eye(3), q=np.zeros(3),
                A_eq=[[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]], b_eq=[0.0, 0.0],
            )
        )
        assert rep.eq_rank == 1


class TestValidation:
    def test_rejects_indefinite_cost(self):
        with pytest.raises(ShapeError):
            QpProblem(P=[[-1.0]], q=[0.0])

    def test_rejects_crossed_bounds(self):
        with pytest.raises(ShapeError):
            QpProblem(P=[[1.0]], q=[0.0], lower=[1.0], upper=[0.0])

    def test_rejects_nonfinite_cost(self):
        with pytest.raises(ShapeError):
            QpProblem(P=[[1.0]], q=[np.inf])


class TestDeterminism:
    def test_bit_reproducible(self):
        rng = np.random.default_rng(7)
        prob = random_equality_qp(rng, n=8, m=3)
        a = solve(prob)
        b = solve(prob)
        assert np.array_equal(a.x, b.x)
        assert a.iterations == b.iterations

    def test_max_iter_status(self):
        rng = np.random.default_rng(8)
        prob = random_equality_qp(rng, n=8, m=3)
        sol = solve(prob, QpSettings(max_iter=2, check_interval=1, polish=False))
        assert sol.status == "max_iter"
