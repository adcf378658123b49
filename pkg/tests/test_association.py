import math

import numpy as np
import pytest

from dbsnet.association import (Association, InfeasibleError, backhaul_violation, evaluate,
                                feasible_sets, optimal_alpha, relaxed_objective,
                                round_association, solve_relaxed)
from dbsnet.channel import LinkMatrix
from dbsnet.scenario import User

from conftest import random_instance
from oracles import bisection_alpha, brute_force_binary, eq23_objective


def _link(r, r0=(), elevation=None):
    r = np.asarray(r, dtype=float)
    n, m1 = r.shape
    if elevation is None:
        elevation = np.where(r[:, 1:] > 0, 80.0, 10.0)
    return LinkMatrix(r, 2.0 ** r - 1.0, np.asarray(r0, dtype=float), np.asarray(elevation, dtype=float))


class TestFeasibleSets:
    def test_delay_sensitive_under_dbs(self):
        link = _link([[3.0, 5.0]], [20.0], [[90.0]])
        mask = feasible_sets([User(0, (0, 0), tau=1)], link, 60.0)
        assert mask.tolist() == [[True, False]]

    def test_boundary_angle_included(self):
        link = _link([[3.0, 5.0]], [20.0], [[60.0]])
        assert feasible_sets([User(0, (0, 0))], link, 60.0).tolist() == [[True, True]]

    def test_outside_all_footprints(self):
        link = _link([[3.0, 0.0, 0.0]], [20.0, 20.0], [[30.0, 20.0]])
        assert feasible_sets([User(0, (0, 0))], link, 60.0).tolist() == [[True, False, False]]


class TestSolveRelaxed:
    def test_single_user_mbs_only(self):
        sol = solve_relaxed(_link([[2.0]]), np.ones((1, 1), bool), 0.0)
        assert sol.association.x.tolist() == [[1.0]]
        assert sol.objective == pytest.approx(math.log(2.0))

    def test_mbs_only_point_polytope(self):
        r = np.array([[2.0], [3.0], [5.0], [7.0]])
        sol = solve_relaxed(_link(r), np.ones((4, 1), bool), 0.0)
        assert np.all(sol.association.x == 1.0)
        assert sol.objective == pytest.approx(sum(math.log(v / 4) for v in r[:, 0]))

    def test_alpha_domain(self):
        with pytest.raises(ValueError):
            solve_relaxed(_link([[2.0]]), np.ones((1, 1), bool), 1.0)

    def test_solution_lies_in_polytope(self):
        rng = np.random.default_rng(4)
        users, _, link = random_instance(rng, 30, 3)
        mask = feasible_sets(users, link, 60.0)
        for alpha in (0.1, 0.3, 0.6):
            sol = solve_relaxed(link, mask, alpha)
            x = sol.association.x
            assert np.allclose(x.sum(axis=1), 1.0)
            assert np.all(x[~mask] == 0) and np.all(x >= 0)
            assert np.all(backhaul_violation(x, link, alpha) <= 1e-9)
            assert sol.objective == pytest.approx(relaxed_objective(x, link, alpha, mask))
            assert sol.gap <= 1e-6 * max(1.0, abs(sol.objective))

    @pytest.mark.parametrize("seed", range(15))
    def test_upper_bounds_every_binary_association(self, seed):
        rng = np.random.default_rng(100 + seed)
        users, _, link = random_instance(rng, 6, 1)
        mask = feasible_sets(users, link, 60.0)
        alpha = float(rng.uniform(0.05, 0.6))
        best, _ = brute_force_binary(link.r, link.backhaul_rate, mask, alpha)
        sol = solve_relaxed(link, mask, alpha, tol=1e-9)
        assert sol.objective >= best - 1e-6

    def test_matches_exhaustive_optimum_when_binary_is_optimal(self):
        # one user per BS with a strict preference: the relaxed optimum is that vertex
        r = np.array([[4.0, 0.5], [0.5, 4.0]])
        link = _link(r, [100.0], [[80.0], [80.0]])
        sol = solve_relaxed(link, np.ones((2, 2), bool), 0.3, tol=1e-12)
        best, assign = brute_force_binary(r, [100.0], np.ones((2, 2), bool), 0.3)
        assert assign == (0, 1)
        assert sol.objective == pytest.approx(best, abs=1e-8)


class TestRounding:
    def test_binary_input_unchanged(self):
        x = np.array([[1.0, 0.0], [0.0, 1.0]])
        link = _link([[4.0, 2.0], [3.0, 2.0]], [50.0])
        out = round_association(x, link, np.ones((2, 2), bool), 0.4)
        assert out.binary and np.array_equal(out.x, x)

    def test_tie_goes_to_mbs(self):
        link = _link([[4.0, 2.0]], [50.0])
        out = round_association(np.array([[0.5, 0.5]]), link, np.ones((1, 2), bool), 0.4)
        assert out.x.tolist() == [[1.0, 0.0]]

    def test_repair_moves_users_to_mbs(self):
        # access rates far above what a 10% backhaul share can carry
        link = _link([[3.0, 9.0], [3.0, 9.0], [3.0, 1.0]], [10.0])
        x = np.array([[0.2, 0.8], [0.1, 0.9], [0.3, 0.7]])
        out = round_association(x, link, np.ones((3, 2), bool), 0.1)
        assert np.all(backhaul_violation(out.x, link, 0.1) <= 1e-12)
        assert out.x[2, 1] == 1.0  # low-rate user never overloads the backhaul

    @pytest.mark.parametrize("seed", range(10))
    def test_random_instances_satisfy_all_constraints(self, seed):
        rng = np.random.default_rng(seed)
        users, _, link = random_instance(rng, 10, 2)
        mask = feasible_sets(users, link, 60.0)
        alpha = float(rng.uniform(0.05, 0.5))
        x = rng.dirichlet(np.ones(3), 10) * mask
        x /= x.sum(axis=1, keepdims=True)
        out = round_association(x, link, mask, alpha)
        assert np.all(out.x.sum(axis=1) == 1) and set(np.unique(out.x)) <= {0.0, 1.0}
        assert np.all(out.x[~mask] == 0)
        assert np.all(backhaul_violation(out.x, link, alpha) <= 1e-9)
        tau = np.array([u.tau for u in users])
        assert np.all(out.x[tau == 1, 1:] == 0)

    def test_joint_rate_scaling_keeps_rounded_association(self):
        rng = np.random.default_rng(12)
        users, _, link = random_instance(rng, 20, 2)
        mask = feasible_sets(users, link, 60.0)
        scaled = LinkMatrix(link.r * 3.0, link.gamma, link.backhaul_rate * 3.0, link.elevation)
        a = solve_relaxed(link, mask, 0.3, tol=1e-10)
        b = solve_relaxed(scaled, mask, 0.3, tol=1e-10)
        assert b.objective == pytest.approx(a.objective + 20 * math.log(3.0), abs=1e-6)
        xa = round_association(a.association.x, link, mask, 0.3).x
        xb = round_association(b.association.x, scaled, mask, 0.3).x
        assert np.array_equal(xa, xb)


class TestOptimalAlpha:
    def test_no_dbs_users(self):
        x = np.array([[1.0, 0.0], [1.0, 0.0]])
        assert optimal_alpha(x, _link([[2.0, 3.0], [2.0, 3.0]], [10.0])) == 0.0

    def test_symmetric_split(self):
        x = np.array([[0.0, 1.0], [0.0, 1.0]])
        link = _link([[2.0, 4.0], [2.0, 6.0]], [5.0])
        assert optimal_alpha(x, link) == pytest.approx(0.5)

    def test_no_backhaul_capacity(self):
        with pytest.raises(InfeasibleError):
            optimal_alpha(np.array([[0.0, 1.0]]), _link([[2.0, 4.0]], [0.0]))

    @pytest.mark.parametrize("seed", range(25))
    def test_matches_bisection(self, seed):
        rng = np.random.default_rng(seed)
        n, m = 8, 3
        r = rng.uniform(0.5, 12, (n, m + 1))
        r0 = rng.uniform(1, 25, m)
        x = np.eye(m + 1)[rng.integers(0, m + 1, n)]
        alpha = optimal_alpha(x, _link(r, r0))
        assert abs(alpha - bisection_alpha(x, r, r0)) <= 1e-9
        if alpha > 0:
            assert np.any(backhaul_violation(x, _link(r, r0), alpha - 1e-9) > 0)
        assert np.all(evaluate(x, alpha, _link(r, r0)).backhaul_slack >= -1e-9)


class TestEvaluate:
    def test_single_user(self):
        rep = evaluate(np.array([[1.0]]), 0.0, _link([[4.0]]))
        assert rep.per_user_rate[0] == 4.0 and rep.utility == pytest.approx(math.log(4.0))

    def test_equal_split(self):
        rep = evaluate(np.array([[1.0], [1.0]]), 0.0, _link([[3.0], [3.0]]))
        assert rep.per_user_rate.tolist() == [1.5, 1.5]

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_direct_formula(self, seed):
        rng = np.random.default_rng(seed)
        n, m = 9, 2
        r = rng.uniform(0.5, 10, (n, m + 1))
        assign = rng.integers(0, m + 1, n)
        x = np.eye(m + 1)[assign]
        alpha = float(rng.uniform(0, 0.9))
        rep = evaluate(x, alpha, _link(r, rng.uniform(5, 20, m)))
        assert abs(rep.utility - eq23_objective(assign.tolist(), r, alpha)) <= 1e-12
        assert np.all(rep.shares.sum(axis=0) <= 1 - alpha + 1e-15)

    def test_rate_floor(self):
        rep = evaluate(np.array([[0.0, 1.0]]), 0.5, _link([[2.0, 0.0]], [5.0]), rate_floor=1e-12)
        assert rep.utility == pytest.approx(math.log(1e-12))

    def test_accepts_association(self):
        a = Association(np.array([[1.0]]), 0.0, True)
        assert evaluate(a, 0.0, _link([[4.0]])).utility == pytest.approx(math.log(4.0))
