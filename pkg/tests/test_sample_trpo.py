import math

import numpy as np
import pytest

from adatrpo.geometry import Regularizer, RegularizerConstants
from adatrpo.harness import generate_chain
from adatrpo.mdp import Mdp, optimal_value, uniform_policy
from adatrpo.sample_trpo import (LearnerConfig, concentrability, required_trajectories,
                                 sample_based_trpo, truncation_horizon)
from adatrpo.sampler import RestartModel, read_trajectory_log


def consts(geometry="euclidean", lam=0.0, A=2, c_max=1.0, gamma=0.9):
    return RegularizerConstants.for_problem(Regularizer(geometry, lam), A, c_max, gamma)


class TestRequiredTrajectories:
    def test_pinned_example(self):
        # r = 4 * 2 * 1 / 0.1 = 80; 8 r^2 / eps^2 = 204800
        log_term = 5 * math.log(4) + math.log(math.pi ** 2 / (6 * 0.1))
        expected = math.ceil(204800 * log_term)
        assert required_trajectories(consts(), 0, 0.5, 0.1, 5) == expected == 1993064

    def test_epsilon_scaling(self):
        c = consts()
        m1 = required_trajectories(c, 3, 0.4, 0.05, 7)
        m2 = required_trajectories(c, 3, 0.8, 0.05, 7)
        assert abs(m1 / 4 - m2) <= 1

    def test_entropy_log_squared_growth(self):
        c = consts("entropy", 1.0, A=3)
        m = [required_trajectories(c, k, 1.0, 0.1, 4) for k in (10, 100, 1000)]
        assert m[0] < m[1] < m[2]
        base = 8 * (4 * 3 * c.c_max_lambda / 0.1) ** 2
        for k, mk in zip((10, 100, 1000), m):
            ratio = mk / (base * (4 * math.log(6) + math.log(math.pi ** 2 * (k + 1) ** 2 / 0.6)))
            assert ratio == pytest.approx((1 + math.log(k)) ** 2, rel=1e-6)

    def test_main_text_variant(self):
        c = consts()
        m = required_trajectories(c, 0, 0.5, 0.1, 5, variant="main")
        assert m == math.ceil(4 * (5 * math.log(4) + math.log(10)) / (0.01 * 0.25))

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            required_trajectories(consts(), 0, 0.0, 0.1, 5)
        with pytest.raises(ValueError):
            required_trajectories(consts(), 0, 0.1, 1.0, 5)


class TestTruncationHorizon:
    def test_pinned_example(self):
        c = consts(A=1)  # r = 4 * 1 * 1 / 0.1 = 40
        assert c.r_omega(0) == pytest.approx(40)
        assert truncation_horizon(c, 0, 0.4) == 67

    def test_clamped_to_one(self):
        c = consts(A=1)
        assert truncation_horizon(c, 0, 8 * 40) == 1
        assert truncation_horizon(c, 0, 1e6) == 1

    def test_halving_epsilon(self):
        c = consts()
        gap = truncation_horizon(c, 0, 0.05) - truncation_horizon(c, 0, 0.1)
        assert abs(gap - math.log(2) / 0.1) <= 1


class TestConcentrability:
    def test_self_consistent(self, garnet):
        reg = Regularizer("euclidean", 0.0)
        _, pi_star = optimal_value(garnet, reg)
        mu = np.full(6, 1 / 6)
        from adatrpo.mdp import discounted_stationary
        d = discounted_stationary(garnet, pi_star, mu)
        assert concentrability(garnet, mu, d, pi_star) == pytest.approx(1.0, abs=1e-12)

    def test_uniform_stationary(self):
        P = np.full((3, 2, 3), 1 / 3)
        m = Mdp(P, np.zeros((3, 2)), 0.9, 1.0)
        u = np.full(3, 1 / 3)
        assert concentrability(m, u, u, uniform_policy(3, 2)) == pytest.approx(1.0)

    def test_missing_support_is_infinite(self, garnet):
        _, pi_star = optimal_value(garnet, Regularizer("euclidean", 0.0))
        nu = np.r_[0.0, np.full(5, 0.2)]
        assert concentrability(garnet, np.full(6, 1 / 6), nu, pi_star) == math.inf


def chain_model(seed, n=5):
    m = generate_chain(n, 0.0, 0.9)
    return RestartModel(m, np.full(n, 1 / n), seed)


class TestSampleBasedTRPO:
    def test_config_validation(self):
        reg = Regularizer("euclidean", 0.0)
        with pytest.raises(ValueError):
            LearnerConfig(0.0, 0.1, 5, reg)
        with pytest.raises(ValueError):
            LearnerConfig(0.1, 1.5, 5, reg)
        with pytest.raises(ValueError):
            LearnerConfig(0.1, 0.1, 5, reg, m_override=0)

    def test_best_gap_monotone_and_report(self):
        cfg = LearnerConfig(0.1, 0.1, 20, Regularizer("euclidean", 0.0), m_override=300)
        rep = sample_based_trpo(chain_model(1), cfg)
        best = rep.column("best_gap")
        assert np.all(np.diff(best) <= 0)
        assert rep.final_best_gap <= best[-1]
        assert all(r.m_k == 300 and r.horizon == 88 for r in rep.records)

    def test_unvisited_states_keep_policy(self):
        # restarts only at the absorbing end: no other state is ever visited
        m = generate_chain(4, 0.0, 0.9)
        model = RestartModel(m, np.array([0, 0, 0, 1.0]), 0)
        cfg = LearnerConfig(0.1, 0.1, 5, Regularizer("entropy", 0.0), m_override=50)
        rep = sample_based_trpo(model, cfg)
        np.testing.assert_array_equal(rep.policy[:3], 0.5)
        assert all(r.n_visited == 1 for r in rep.records)

    def test_seed_determinism(self):
        cfg = LearnerConfig(0.1, 0.1, 8, Regularizer("entropy", 0.5), m_override=200, workers=3)
        a = sample_based_trpo(chain_model(5), cfg)
        b = sample_based_trpo(chain_model(5), cfg)
        assert a.records == b.records
        np.testing.assert_array_equal(a.best_policy, b.best_policy)

    def test_improves_and_more_data_helps(self):
        reg = Regularizer("euclidean", 0.0)
        rep = sample_based_trpo(chain_model(7), LearnerConfig(0.1, 0.1, 50, reg, m_override=2000))
        assert rep.final_best_gap < rep.records[0].mu_gap
        small = [sample_based_trpo(chain_model(s), LearnerConfig(0.1, 0.1, 50, reg, m_override=200))
                 .final_best_gap for s in range(5)]
        big = [sample_based_trpo(chain_model(s), LearnerConfig(0.1, 0.1, 50, reg, m_override=2000))
               .final_best_gap for s in range(5)]
        assert np.mean(big) < np.mean(small)

    def test_trajectory_log_written(self, tmp_path):
        path = tmp_path / "t.bin"
        cfg = LearnerConfig(0.1, 0.1, 3, Regularizer("euclidean", 0.0), m_override=10,
                            horizon_override=4, trajectory_log=str(path))
        sample_based_trpo(chain_model(0), cfg)
        rec = read_trajectory_log(path)
        assert len(rec) == 30
        np.testing.assert_array_equal(np.unique(rec["k"]), [0, 1, 2])

    def test_formula_budget_used_without_override(self):
        cfg = LearnerConfig(50.0, 0.5, 1, Regularizer("euclidean", 0.0))
        rep = sample_based_trpo(chain_model(0), cfg)
        c = consts()
        assert rep.records[0].m_k == required_trajectories(c, 0, 50.0, 0.5, 5)
        assert rep.records[0].horizon == truncation_horizon(c, 0, 50.0)
