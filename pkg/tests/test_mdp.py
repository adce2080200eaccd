import numpy as np
import pytest

from adatrpo.geometry import Regularizer, omega
from adatrpo.mdp import (ConvergenceError, Mdp, MdpValidationError, bellman_opt, bellman_pi,
                         check_distribution, deterministic_policy, directional_derivative,
                         discounted_stationary, enumerate_deterministic_values, greedy_policy,
                         optimal_value, policy_value, q_function, regularized_cost,
                         uniform_policy, value_upper_bound)
from oracles import (extended_value, fd_directional, grid_argmin, interior_policy,
                     stationary_ref, value_iteration_ref)

EUC0 = Regularizer("euclidean", 0.0)


def make(rng, S, A, gamma=0.9):
    return Mdp(rng.dirichlet(np.ones(S), size=(S, A)), rng.uniform(0, 1, (S, A)), gamma, 1.0)


class TestValidation:
    def test_row_sum_error_has_path(self):
        P = np.full((2, 1, 2), 0.5)
        P[1, 0] = [0.5, 0.6]
        with pytest.raises(MdpValidationError) as e:
            Mdp(P, np.zeros((2, 1)), 0.9, 1.0)
        assert e.value.path == "transition[1][0]"

    def test_negative_probability(self):
        P = np.array([[[1.5, -0.5]], [[0.0, 1.0]]])
        with pytest.raises(MdpValidationError, match=r"transition\[0\]\[0\]\[1\]"):
            Mdp(P, np.zeros((2, 1)), 0.9, 1.0)

    def test_cost_range(self):
        with pytest.raises(MdpValidationError) as e:
            Mdp(np.ones((1, 2, 1)), np.array([[0.5, 1.5]]), 0.9, 1.0)
        assert e.value.path == "cost[0][1]"

    @pytest.mark.parametrize("gamma", [0.0, 1.0, -0.1])
    def test_gamma_range(self, gamma):
        with pytest.raises(MdpValidationError):
            Mdp(np.ones((1, 1, 1)), np.zeros((1, 1)), gamma, 1.0)

    def test_arrays_are_read_only(self, garnet):
        with pytest.raises(ValueError):
            garnet.transition[0, 0, 0] = 1.0

    def test_json_roundtrip(self, garnet, tmp_path):
        p = tmp_path / "m.json"
        garnet.save(p)
        back = Mdp.load(p)
        np.testing.assert_array_equal(back.transition, garnet.transition)
        np.testing.assert_array_equal(back.cost, garnet.cost)
        assert back.gamma == garnet.gamma

    def test_json_shape_error(self, garnet):
        d = garnet.to_dict()
        d["cost"][2] = d["cost"][2][:-1]
        with pytest.raises(MdpValidationError, match=r"cost\[2\]"):
            Mdp.from_dict(d)

    def test_bad_json_reports_line(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text('{\n"n_states": 1,\n oops\n}')
        with pytest.raises(MdpValidationError, match="line 3"):
            Mdp.load(p)

    def test_distribution_check(self):
        with pytest.raises(MdpValidationError):
            check_distribution([0.5, 0.6], 2)


class TestPolicyValue:
    def test_single_state(self):
        m = Mdp(np.ones((1, 1, 1)), np.ones((1, 1)), 0.5, 1.0)
        assert policy_value(m, np.ones((1, 1)), EUC0)[0] == pytest.approx(2.0, abs=1e-14)

    def test_matches_fixed_point_iteration(self, rng):
        m = make(rng, 5, 3)
        reg = Regularizer("entropy", 0.1)
        pi = rng.dirichlet(np.ones(3), size=5)
        v = policy_value(m, pi, reg)
        ref = np.zeros(5)
        for _ in range(10_000):
            ref = bellman_pi(m, pi, reg, ref)
        np.testing.assert_allclose(v, ref, atol=1e-8)
        assert np.max(np.abs(bellman_pi(m, pi, reg, v) - v)) <= 1e-10

    def test_bounds(self, rng):
        m = make(rng, 6, 4)
        for reg in (Regularizer("euclidean", 2.0), Regularizer("entropy", 2.0)):
            pi = rng.dirichlet(np.ones(4), size=6)
            v = policy_value(m, pi, reg)
            assert np.all(v >= 0) and np.all(v <= value_upper_bound(m, reg) + 1e-12)

    def test_zero_discount_limit(self, rng):
        # gamma must be positive; at tiny gamma v tends to the one-step cost
        m = Mdp(rng.dirichlet(np.ones(3), size=(3, 2)), rng.uniform(0, 1, (3, 2)), 1e-12, 1.0)
        pi = uniform_policy(3, 2)
        reg = Regularizer("entropy", 0.3)
        np.testing.assert_allclose(policy_value(m, pi, reg), regularized_cost(m, pi, reg),
                                   atol=1e-11)


class TestQFunction:
    def test_identity(self, rng):
        m = make(rng, 5, 3)
        for reg in (EUC0, Regularizer("entropy", 0.7), Regularizer("euclidean", 0.7)):
            pi = rng.dirichlet(np.ones(3), size=5)
            v = policy_value(m, pi, reg)
            q = q_function(m, pi, reg, v)
            np.testing.assert_allclose(np.sum(pi * q, axis=1), v, atol=1e-9)
            assert np.all(q >= 0) and np.all(q <= value_upper_bound(m, reg) + 1e-12)

    def test_truncated_enumeration(self, rng):
        m = make(rng, 4, 2)
        reg = Regularizer("entropy", 0.4)
        pi = rng.dirichlet(np.ones(2), size=4)
        q = q_function(m, pi, reg, policy_value(m, pi, reg))
        c = regularized_cost(m, pi, reg)
        Ppi = np.einsum("sa,sat->st", pi, m.transition)
        for s in range(4):
            for a in range(2):
                d = m.transition[s, a].copy()
                total = m.cost[s, a] + reg.lam * omega(reg, pi[s])
                for t in range(1, 200):
                    total += m.gamma ** t * d @ c
                    d = d @ Ppi
                assert q[s, a] == pytest.approx(total, abs=1e-6)

    def test_cost_only_at_small_discount(self, rng):
        m = Mdp(rng.dirichlet(np.ones(3), size=(3, 2)), rng.uniform(0, 1, (3, 2)), 1e-15, 1.0)
        q = q_function(m, uniform_policy(3, 2), EUC0, np.ones(3))
        np.testing.assert_allclose(q, m.cost, atol=1e-14)


class TestBellman:
    def test_zero_vector(self, rng):
        m = make(rng, 4, 3)
        pi = rng.dirichlet(np.ones(3), size=4)
        reg = Regularizer("entropy", 0.5)
        np.testing.assert_array_equal(bellman_pi(m, pi, reg, np.zeros(4)),
                                      regularized_cost(m, pi, reg))

    def test_contraction(self, rng):
        m = make(rng, 5, 3)
        reg = Regularizer("euclidean", 0.3)
        pi = rng.dirichlet(np.ones(3), size=5)
        for _ in range(100):
            v, u = rng.normal(size=5) * 10, rng.normal(size=5) * 10
            lhs = np.max(np.abs(bellman_pi(m, pi, reg, v) - bellman_pi(m, pi, reg, u)))
            assert lhs <= m.gamma * np.max(np.abs(v - u)) + 1e-12
            lhs = np.max(np.abs(bellman_opt(m, reg, v) - bellman_opt(m, reg, u)))
            assert lhs <= m.gamma * np.max(np.abs(v - u)) + 1e-12

    def test_unregularized_min(self, rng):
        m = make(rng, 4, 3)
        v = rng.uniform(size=4)
        x = m.cost + m.gamma * m.transition @ v
        np.testing.assert_array_equal(bellman_opt(m, EUC0, v), x.min(axis=1))

    def test_greedy_tie_breaks_low(self):
        m = Mdp(np.ones((1, 3, 1)), np.array([[0.5, 0.2, 0.2]]), 0.9, 1.0)
        np.testing.assert_array_equal(greedy_policy(m, EUC0, np.zeros(1)), [[0, 1, 0]])

    def test_constant_x_entropy(self):
        m = Mdp(np.ones((1, 3, 1)), np.full((1, 3), 0.4), 0.5, 1.0)
        reg = Regularizer("entropy", 0.8)
        assert bellman_opt(m, reg, np.array([1.0]))[0] == pytest.approx(0.9, abs=1e-14)

    @pytest.mark.parametrize("geometry", ["euclidean", "entropy"])
    def test_soft_min_grid(self, rng, geometry):
        reg = Regularizer(geometry, 0.5)
        for _ in range(3):
            x = rng.uniform(0, 2, 3)
            m = Mdp(np.ones((1, 3, 1)), x[None] / 2, 1e-15, 1.0)
            val = bellman_opt(m, reg, np.zeros(1))[0]
            p_star = greedy_policy(m, reg, np.zeros(1))[0]
            f = lambda G: G @ (x / 2) + 0.5 * omega(geometry, G)
            p_grid = grid_argmin(f, 3, 1e-3)
            assert val == pytest.approx(f(p_grid[None])[0], abs=1e-3)
            assert np.max(np.abs(p_star - p_grid)) <= 1e-3 + 1e-9


class TestOptimalValue:
    def test_single_state(self):
        m = Mdp(np.ones((1, 3, 1)), np.array([[0.7, 0.3, 0.5]]), 0.8, 1.0)
        v, pi = optimal_value(m, EUC0)
        assert v[0] == pytest.approx(0.3 / 0.2, abs=1e-10)
        np.testing.assert_array_equal(pi, [[0, 1, 0]])

    def test_matches_enumeration(self, rng):
        m = make(rng, 6, 2)
        v, _ = optimal_value(m, EUC0)
        np.testing.assert_allclose(v, enumerate_deterministic_values(m), atol=1e-8)
        np.testing.assert_allclose(v, value_iteration_ref(m.transition, m.cost, m.gamma),
                                   atol=1e-8)

    def test_regularization_raises_value(self, rng):
        m = make(rng, 5, 3)
        v0, _ = optimal_value(m, EUC0)
        for g in ("euclidean", "entropy"):
            v1, pi1 = optimal_value(m, Regularizer(g, 0.5))
            assert np.all(v0 <= v1 + 1e-10)
            np.testing.assert_allclose(policy_value(m, pi1, Regularizer(g, 0.5)), v1, atol=1e-9)

    def test_iteration_cap(self, rng):
        with pytest.raises(ConvergenceError):
            optimal_value(make(rng, 3, 2), EUC0, max_iter=3)


class TestStationary:
    def test_self_loops(self):
        P = np.zeros((3, 2, 3))
        for s in range(3):
            P[s, :, s] = 1
        m = Mdp(P, np.zeros((3, 2)), 0.9, 1.0)
        start = np.array([0.2, 0.5, 0.3])
        np.testing.assert_allclose(discounted_stationary(m, uniform_policy(3, 2), start), start,
                                   atol=1e-15)

    def test_truncated_sum(self, rng):
        m = make(rng, 6, 3)
        pi = rng.dirichlet(np.ones(3), size=6)
        start = rng.dirichlet(np.ones(6))
        d = discounted_stationary(m, pi, start)
        np.testing.assert_allclose(d, stationary_ref(m.transition, pi, m.gamma, start, 501),
                                   atol=1e-8)
        assert d.sum() == pytest.approx(1, abs=1e-12)
        assert np.all(d >= (1 - m.gamma) * start - 1e-15)


class TestDirectionalDerivative:
    def test_same_policy(self, rng):
        m = make(rng, 4, 3)
        pi = interior_policy(rng, 4, 3)
        for g in ("euclidean", "entropy"):
            np.testing.assert_allclose(directional_derivative(m, Regularizer(g, 0.5), pi, pi), 0,
                                       atol=1e-13)

    @pytest.mark.parametrize("geometry", ["euclidean", "entropy"])
    def test_finite_difference(self, rng, geometry):
        for lam in (0.0, 0.7):
            m = make(rng, 5, 3)
            pi, pi2 = interior_policy(rng, 5, 3), rng.dirichlet(np.ones(3), size=5)
            got = directional_derivative(m, Regularizer(geometry, lam), pi, pi2)
            ref = fd_directional(m.transition, m.cost, m.gamma, pi, pi2, geometry, lam)
            np.testing.assert_allclose(got, ref, atol=1e-4)

    def test_myopic_limit(self, rng):
        m = Mdp(rng.dirichlet(np.ones(3), size=(3, 2)), rng.uniform(0, 1, (3, 2)), 1e-15, 1.0)
        pi, pi2 = interior_policy(rng, 3, 2), rng.dirichlet(np.ones(2), size=3)
        q = q_function(m, pi, EUC0, policy_value(m, pi, EUC0))
        np.testing.assert_allclose(directional_derivative(m, EUC0, pi, pi2),
                                   np.sum(q * (pi2 - pi), axis=1), atol=1e-13)

    def test_entropy_boundary(self, rng):
        m = make(rng, 2, 2)
        with pytest.raises(ValueError):
            directional_derivative(m, Regularizer("entropy", 0.1), deterministic_policy([0, 1], 2),
                                   uniform_policy(2, 2))


def test_extended_value_agrees_on_simplex(rng):
    m = make(rng, 4, 2)
    pi = rng.dirichlet(np.ones(2), size=4)
    reg = Regularizer("entropy", 0.3)
    np.testing.assert_allclose(
        extended_value(m.transition, m.cost, m.gamma, pi, "entropy", 0.3),
        policy_value(m, pi, reg), atol=1e-10)
