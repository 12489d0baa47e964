import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpeval import oracle
from dpeval import rng as rngmod
from dpeval.errors import OracleViolation
from dpeval.estimators import EvalWeights, FeatureMap
from dpeval.mdp import VisitStats, build_chain, visit_probabilities
from dpeval.returns import Signature, aggregate
from dpeval.sensitivity import PrivacyBudget, phi_lambda, privacy_constants, smooth_bound_lambda, smooth_bound_w

from conftest import dataset, traj

ONES3 = np.ones(3)
LSW3 = oracle.LswSolver(EvalWeights.fixed(ONES3))
LSL3 = oracle.LslSolver(EvalWeights.rho(ONES3), 2.0)


def base3():
    return dataset(traj((0, 1.0), (1, 0.0), (2, 1.0)), traj((1, 1.0)), traj((2, 0.0), (2, 1.0)))


class TestEnumeration:
    def test_pool_size(self):
        assert len(oracle.enumerate_trajectories([0, 1], 3)) == 2 * 2 + 4 * 4 + 8 * 8

    def test_pool_cap(self):
        with pytest.raises(ValueError):
            oracle.NeighborPool(base3(), [traj((0, 0.0))] * (oracle.MAX_POOL + 1))


class TestLocalSensitivity:
    def test_identity_neighbour(self):
        ds = base3()
        pool = oracle.NeighborPool(ds, [ds.trajectories[-1]])
        observed, bound = oracle.local_sensitivity_oracle(pool, LSW3, FeatureMap.identity(3), 0.5, 1.0)
        assert observed == 0.0 and bound > 0

    @pytest.mark.parametrize("solver", [LSW3, LSL3], ids=["lsw", "lsl"])
    def test_full_pool(self, solver):
        pool = oracle.NeighborPool(base3(), oracle.enumerate_trajectories([0, 1, 2], 3))
        observed, bound = oracle.local_sensitivity_oracle(pool, solver, FeatureMap.identity(3), 0.5, 1.0)
        assert 0 < observed <= bound * (1 + oracle.BOUND_RTOL)

    def test_violation_raises(self):
        pool = oracle.NeighborPool(base3(), oracle.enumerate_trajectories([0, 1, 2], 2))
        # claiming a return bound far below the real one must trip the check
        with pytest.raises(OracleViolation):
            oracle.local_sensitivity_oracle(pool, LSW3, FeatureMap.identity(3), 0.5, 1.0, f_max=0.01)


class TestCalibration:
    @pytest.mark.parametrize("solver", [LSW3, LSL3], ids=["lsw", "lsl"])
    def test_small_pool(self, solver):
        alts = oracle.enumerate_trajectories([0, 1], 2)
        budget = privacy_constants(0.1, 0.1, 3)
        rep = oracle.certify_calibration(alts, 3, FeatureMap.identity(3), solver, 0.5, 1.0, budget)
        n = len(alts)
        assert rep.n_pairs == math.comb(n + 1, 2) * n * n
        assert rep.ok
        assert 0 < rep.worst_a <= 1 and rep.worst_log_gap <= budget.beta + oracle.SMOOTH_LOG_SLACK

    def test_detects_undersized_noise(self):
        alts = oracle.enumerate_trajectories([0, 1], 2)
        budget = privacy_constants(0.1, 0.1, 3)
        # a return bound below the real returns shrinks sigma but not the parameter change
        rep = oracle.certify_calibration(alts, 2, FeatureMap.identity(3), LSW3, 0.5, 1.0, budget, f_max=0.01)
        assert rep.violations_a > 0 and rep.violations_bound > 0 and not rep.ok
        with pytest.raises(OracleViolation):
            rep.assert_ok()


class TestSmoothness:
    def family_w(self, budget):
        w = EvalWeights.fixed(np.ones(5))
        return lambda v: (smooth_bound_w(v, w, budget).psi, float(np.sum(1.0 / np.maximum(v.counts, 1) ** 2)))

    def test_constant_family(self):
        b = privacy_constants(0.1, 0.1, 5)
        v = Signature(np.full(5, 4), 9)
        rep = oracle.check_smoothness(self.family_w(b), [(v, v)], b)
        assert rep.max_log_gap == 0.0

    @given(st.lists(st.integers(0, 30), min_size=5, max_size=5), st.floats(1e-3, 1.0))
    @settings(max_examples=100)
    def test_shift_by_one(self, counts, eps):
        b = privacy_constants(eps, 0.1, 5)
        v = Signature(np.array(counts), 31)
        rep = oracle.check_smoothness(self.family_w(b), [(v, Signature(v.counts + 1, 31))], b)
        assert rep.ok

    def test_zero_to_one(self):
        b = privacy_constants(0.1, 0.1, 5)
        v = Signature(np.array([0, 7, 7, 7, 7]), 7)
        rep = oracle.check_smoothness(self.family_w(b), [(v, Signature(np.array([1, 7, 7, 7, 7]), 7))], b)
        assert rep.ok

    def test_lambda_family(self):
        b = privacy_constants(0.1, 0.1, 40)
        rho = EvalWeights.rho(np.ones(40))
        pairs = oracle.random_adjacent_signatures(200, 40, 200, rngmod.make_rng(5))
        fam = lambda v: (smooth_bound_lambda(v, rho, 2.0, 1.0, b).psi, phi_lambda(v, rho, 0, 2.0, 1.0))
        assert oracle.check_smoothness(fam, pairs, b).ok

    def test_rejects_distant_pair(self):
        b = privacy_constants(0.1, 0.1, 5)
        v = Signature(np.zeros(5, dtype=int), 3)
        with pytest.raises(ValueError):
            oracle.check_smoothness(self.family_w(b), [(v, Signature(np.full(5, 2), 3))], b)

    def test_pairs_are_adjacent(self):
        for v, v2 in oracle.random_adjacent_signatures(300, 10, 50, rngmod.make_rng(0)):
            assert v.m == v2.m and np.max(np.abs(v.counts - v2.counts)) <= 1


class TestNoiseIdentity:
    def test_zero_noise(self):
        s = aggregate(base3(), 0.5, 3)
        res = oracle.noise_expectation_identity("lsw", s, FeatureMap.identity(3), EvalWeights.fixed(ONES3), 0.0,
                                                100, rngmod.make_rng(0))
        assert res.empirical_mean == 0.0 and res.analytic == 0.0 and res.z_score == 0.0

    def test_identity_features_chi_square_mean(self):
        s = aggregate(dataset(traj((0, 1.0), (1, 1.0))), 0.5, 2)
        res = oracle.noise_expectation_identity("lsw", s, FeatureMap.identity(2), EvalWeights.fixed([1, 1]), 1.0,
                                                100_000, rngmod.make_rng(1))
        assert res.analytic == 2.0
        assert res.empirical_mean == pytest.approx(2.0, rel=0.02)
        assert res.z_score < 5

    def test_ridge_scalar_analytic(self):
        s = aggregate(dataset(traj((0, 1.0))), 0.5, 1)
        res = oracle.noise_expectation_identity("lsl", s, FeatureMap.identity(1), EvalWeights.rho([1.0]), 1.0,
                                                20_000, rngmod.make_rng(2), lam=1.0)
        assert res.analytic == 1.5
        assert res.z_score < 5

    def test_unknown_mechanism(self):
        s = aggregate(base3(), 0.5, 3)
        with pytest.raises(ValueError):
            oracle.noise_expectation_identity("x", s, FeatureMap.identity(3), EvalWeights.fixed(ONES3), 1.0, 10,
                                              rngmod.make_rng(0))


def single_state_visit():
    return VisitStats(np.array([1.0]), np.array([[1.0]]), np.array([[0.0]]))


class TestUtilityBounds:
    def test_single_state_value(self):
        b = PrivacyBudget(1.0, 0.1, 1, 1.0, 0.1)
        val = oracle.utility_bound_lsw(single_state_visit(), EvalWeights.fixed([1.0]), 10, b, 1.0, 1.0, 1.0)
        assert val == pytest.approx(6 * (1 / 100 + 0.01 * 0.95**10), rel=1e-14)
        assert val == pytest.approx(0.0959, abs=5e-5)

    def test_zero_visit_state_counts_fully(self):
        b = PrivacyBudget(1.0, 0.1, 1, 1.0, 0.1)
        vs = VisitStats(np.array([0.0, 1.0]), np.diag([0.0, 1.0]), np.zeros((2, 2)))
        val = oracle.utility_bound_lsw(vs, EvalWeights.fixed([2.0, 0.0]), 10, b, 1.0, 1.0, 1.0)
        assert val == 2.0

    def test_zero_weights(self):
        vs = visit_probabilities(build_chain(4, 0.5, 0.9))
        assert oracle.utility_bound_lsw_scratch(vs.p, np.zeros(4), 10, 1.0, 0.1, 1.0, 1.0, 1.0) == 0.0

    def test_beta_limit(self):
        b = PrivacyBudget(1.0, 0.1, 1, 1.0, 0.6)
        with pytest.raises(ValueError):
            oracle.utility_bound_lsw(single_state_visit(), EvalWeights.fixed([1.0]), 10, b, 1.0, 1.0, 1.0)
        assert oracle.utility_bound_lsw(single_state_visit(), EvalWeights.fixed([1.0]), 10, b, 1.0, 1.0, 1.0,
                                        variant="tight") > 0

    def test_inverse_square_decay(self):
        vs = visit_probabilities(build_chain(40, 0.5, 0.99))
        w = EvalWeights.fixed(np.append(np.ones(39), 0.0))
        b = privacy_constants(0.1, 0.1, 39)
        small = oracle.utility_bound_lsw(vs, w, 10**6, b, 1.0, 1.0, 1.0)
        large = oracle.utility_bound_lsw(vs, w, 10**7, b, 1.0, 1.0, 1.0)
        assert small / large >= 95

    @given(st.integers(1, 500), st.floats(1e-3, 0.5))
    @settings(max_examples=50)
    def test_lsw_two_codings(self, m, beta):
        vs = visit_probabilities(build_chain(6, 0.3, 0.9))
        w = np.array([1.0, 0.5, 2.0, 1.0, 0.3, 0.0])
        b = PrivacyBudget(1.0, 0.1, 5, 3.0, beta)
        a = oracle.utility_bound_lsw(vs, EvalWeights.fixed(w), m, b, 1.0, 0.7, 2.0)
        s = oracle.utility_bound_lsw_scratch(vs.p, w, m, 3.0, beta, 1.0, 0.7, 2.0)
        assert a == pytest.approx(s, rel=1e-12)

    def chain4(self):
        vs = visit_probabilities(build_chain(4, 0.5, 0.9))
        feats = FeatureMap(np.vstack([np.eye(3), np.zeros((1, 3))]))
        return vs, feats

    def test_chain4_visit_probabilities(self):
        vs, _ = self.chain4()
        assert np.allclose(vs.p, [1 / 3, 2 / 3, 1.0, 0.0])

    def test_lsl_zero_rho(self):
        vs, feats = self.chain4()
        b = PrivacyBudget(1.0, 0.1, 3, 5.0, 0.1)
        assert oracle.utility_bound_lsl(vs, EvalWeights.rho(np.zeros(4)), feats, 50, 5.0, b, 1.0) == 0.0

    @given(st.integers(1, 200), st.floats(1e-3, 0.49), st.floats(1.5, 100.0))
    @settings(max_examples=60)
    def test_lsl_two_codings(self, m, beta, lam):
        vs, feats = self.chain4()
        rho = np.array([1.0, 0.4, 0.8, 0.0])
        b = PrivacyBudget(1.0, 0.1, 3, 2.0, beta)
        a = oracle.utility_bound_lsl(vs, EvalWeights.rho(rho), feats, m, lam, b, 1.0)
        s = oracle.utility_bound_lsl_scratch(vs.p, vs.p_pair, vs.p_excl, rho, feats.phi, m, lam, 2.0, beta, 1.0)
        assert a > 0 and math.isfinite(a)
        assert a == pytest.approx(s, rel=1e-10)

    def test_lsl_lambda_scaling(self):
        vs, feats = self.chain4()
        rho = EvalWeights.rho([1.0, 1.0, 1.0, 0.0])
        b = PrivacyBudget(1.0, 0.1, 3, 2.0, 0.1)
        ratio = lambda m, lam: (oracle.utility_bound_lsl(vs, rho, feats, m, lam, b, 1.0)
                                / oracle.utility_bound_lsl(vs, rho, feats, m, 10 * lam, b, 1.0))
        # many trajectories per unit of lambda: the m / lambda^3 and 1 / lambda^2 groups lead
        assert 10**2 <= ratio(10**4, 10.0) <= 10**4
        # lambda comparable to m: the lambda d |rho|^2 / m group decays only like 1 / lambda
        assert 10 <= ratio(100, 50.0) < 10**2

    def test_lsl_preconditions(self):
        vs, feats = self.chain4()
        rho = EvalWeights.rho([1.0, 1.0, 1.0, 0.0])
        with pytest.raises(ValueError):
            oracle.utility_bound_lsl(vs, rho, feats, 10, 5.0, PrivacyBudget(1.0, 0.1, 3, 1.0, 0.5), 1.0)
        with pytest.raises(ValueError):
            oracle.utility_bound_lsl(vs, rho, feats, 10, 1.0, PrivacyBudget(1.0, 0.1, 3, 1.0, 0.1), 1.0)


class TestBinomialLemma:
    def test_two_terms(self):
        c = oracle.binomial_lemma_check(1, 0.5)
        assert c.inverse_residual == 0.0
        assert c.ok

    def test_certain_success(self):
        c = oracle.binomial_lemma_check(7, 1.0)
        assert c.inverse_sq_enumerated == Fraction(1, 49)
        assert c.ok

    def test_m10_p03(self):
        c = oracle.binomial_lemma_check(10, 0.3)
        assert c.ok and c.inverse_sq_enumerated < c.inverse_sq_bound

    @pytest.mark.parametrize("m", range(1, 31))
    def test_grid(self, m):
        for p10 in range(1, 10):
            assert oracle.binomial_lemma_check(m, p10 / 10).ok

    def test_domain(self):
        with pytest.raises(ValueError):
            oracle.binomial_lemma_check(31, 0.5)
        with pytest.raises(ValueError):
            oracle.binomial_lemma_check(3, 0.0)


class TestMaxLemmas:
    def test_single_point_domain(self):
        for b in (0.01, 1.0, 5.0):
            assert oracle.max_lemma_inverse_sq(1.0, b) == 1.0

    def test_stated_form_values(self):
        assert oracle.max_lemma_inverse_sq_stated(5.0, 3.0) == pytest.approx(math.exp(1 - 15), rel=1e-15)
        assert oracle.max_lemma_inverse_sq_stated(5.0, 0.1) == 1 / 25

    def test_stated_form_disagrees_with_brute_force(self):
        f = lambda b: (lambda x: np.exp(-b * x) / (5.0 - x) ** 2)
        assert oracle.grid_max(f(3.0), 0.0, 4.0) == pytest.approx(1 / 25, rel=1e-9)
        assert oracle.grid_max(f(0.1), 0.0, 4.0) == pytest.approx(math.exp(-0.4), rel=1e-9)

    def test_corrected_forms_on_examples(self):
        assert oracle.max_lemma_inverse_sq(5.0, 3.0) == 1 / 25
        assert oracle.max_lemma_inverse_sq(5.0, 0.1) == pytest.approx(math.exp(-0.4), rel=1e-15)

    @given(st.floats(1.0, 200.0), st.floats(1e-4, 20.0))
    @settings(max_examples=100, deadline=None)
    def test_inverse_sq_against_grid(self, a, b):
        truth = oracle.grid_max(lambda x: np.exp(-b * x) / (a - x) ** 2, 0.0, a - 1.0)
        assert oracle.max_lemma_inverse_sq(a, b) == pytest.approx(truth, rel=1e-9)

    @given(st.floats(0.0, 49.0), st.floats(1e-5, 20.0))
    @settings(max_examples=100, deadline=None)
    def test_linear_against_grid(self, a, b):
        truth = oracle.grid_max(lambda x: np.exp(-2 * b * x) * (a + x), 0.0, 50.0 - a)
        assert oracle.max_lemma_linear(a, b, 50.0) == pytest.approx(truth, rel=1e-9)

    def test_default_grid_report(self):
        rep = oracle.max_lemma_check()
        assert rep.n_points == 200
        assert rep.ok(which="corrected")
        assert rep.stated_failures > 0 and not rep.ok(which="stated")
