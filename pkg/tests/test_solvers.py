"""Policy solvers against hand-computed optima and the enumeration oracle."""

import itertools

import numpy as np
import pytest

from nswrank import (
    DegenerateMarketError,
    ExposureModel,
    ImpactFunction,
    InfeasibleError,
    LinkFunction,
    NswConfig,
    RelevanceMatrix,
    SizeError,
    ZeroMeritError,
    amortized_exposure,
    brute_force_oracle,
    item_impact,
    merit,
    solve_expo_fair,
    solve_nsw,
    solve_uniform,
    solve_utility_max,
    user_utility,
)

RW = ImpactFunction.RELEVANCE_WEIGHTED
XO = ImpactFunction.EXPOSURE_ONLY


def assert_doubly_stochastic(policy):
    mats = policy.matrices
    assert mats.min() >= 0.0 and mats.max() <= 1.0
    assert np.abs(mats.sum(axis=2) - 1).max() < 1e-9
    assert np.abs(mats.sum(axis=1) - 1).max() < 1e-9


def random_market(rng, m_max=6, n_max=6, low=0.1):
    m = int(rng.integers(1, m_max + 1))
    n = int(rng.integers(2, n_max + 1))
    return RelevanceMatrix(rng.uniform(low, 1.0, (m, n)))


class TestSolveUniform:
    def test_entries(self):
        assert np.all(solve_uniform(2, 2).matrices == 0.5)

    def test_toy_measurements(self, toy_market):
        rel, exp = toy_market
        policy = solve_uniform(2, 2)
        assert user_utility(policy, rel, exp) == pytest.approx(1.00)
        assert np.allclose(item_impact(policy, rel, exp), [0.65, 0.35])

    def test_exposure_symmetry(self):
        exp = ExposureModel.make("inverse", 4, 2)
        expo = amortized_exposure(solve_uniform(5, 4), exp)
        assert np.allclose(expo, 5 * exp.total_exposure / 4)


class TestSolveUtilityMax:
    def test_toy(self, toy_market):
        rel, exp = toy_market
        policy = solve_utility_max(rel, exp)
        assert user_utility(policy, rel, exp) == pytest.approx(1.30)
        assert np.allclose(item_impact(policy, rel, exp), [1.3, 0.0])
        assert np.allclose(amortized_exposure(policy, exp), [2.0, 0.0])

    def test_ties_break_by_item_index(self):
        rel = RelevanceMatrix([[0.4, 0.4, 0.4]])
        exp = ExposureModel.make("inverse", 3, 3)
        assert np.array_equal(solve_utility_max(rel, exp).matrices[0], np.eye(3))

    def test_matches_permutation_enumeration(self):
        rel = RelevanceMatrix([[0.1, 0.9, 0.5]])
        exp = ExposureModel.make("inverse", 3, 3)
        policy = solve_utility_max(rel, exp)
        # independent oracle: evaluate all 3! rankings
        best = max(
            sum(e * rel.values[0, i] for e, i in zip(exp.weights, perm))
            for perm in itertools.permutations(range(3)))
        assert best == pytest.approx(0.9 + 0.5 / 2 + 0.1 / 3)
        assert user_utility(policy, rel, exp) == pytest.approx(best)
        # ranking is (i2, i3, i1)
        assert np.array_equal(np.argmax(policy.matrices[0], axis=0), [1, 2, 0])


class TestSolveExpoFair:
    def test_toy_allocation(self, toy_market):
        rel, exp = toy_market
        policy, diag = solve_expo_fair(rel, exp)
        assert np.allclose(amortized_exposure(policy, exp), [1.3, 0.7])
        assert np.allclose(item_impact(policy, rel, exp), [0.95, 0.28])
        assert user_utility(policy, rel, exp) == pytest.approx(1.23)
        assert diag.constraint_residual <= 1e-6
        assert diag.objective_value == pytest.approx(1.23)

    def test_toy_unique_optimum(self, toy_market):
        # on the constraint line the utility is 0.83 + 0.4 x, so the unique
        # maximum puts user 1 fully on item 1 and splits user 2 as 0.3 / 0.7
        rel, exp = toy_market
        policy, _ = solve_expo_fair(rel, exp)
        prof = policy.matrices @ exp.weights
        assert np.allclose(prof, [[1.0, 0.0], [0.3, 0.7]], atol=1e-8)

    def test_equal_merit_square_market(self):
        rel = RelevanceMatrix(np.full((4, 4), 0.5))
        exp = ExposureModel.make("inverse", 4, 1)
        policy, _ = solve_expo_fair(rel, exp)
        assert np.allclose(amortized_exposure(policy, exp), 1.0, atol=1e-8)

    def test_infeasible_targets(self):
        # one user, huge merit skew, two exposed slots: the top item's target
        # exceeds what a single doubly stochastic row can collect
        rel = RelevanceMatrix([[0.98, 0.01, 0.01]])
        exp = ExposureModel.make("inverse", 3, 2)
        with pytest.raises(InfeasibleError):
            solve_expo_fair(rel, exp)

    def test_zero_merit(self):
        rel = RelevanceMatrix([[0.5, 0.0], [0.5, 0.0]])
        exp = ExposureModel.make("inverse", 2, 1)
        with pytest.raises(ZeroMeritError):
            solve_expo_fair(rel, exp)


class TestSolveNsw:
    def test_toy_plain(self, toy_market):
        rel, exp = toy_market
        policy, diag = solve_nsw(rel, exp)
        assert np.allclose(item_impact(policy, rel, exp), [0.8, 0.4], atol=1e-8)
        assert user_utility(policy, rel, exp) == pytest.approx(1.20, abs=1e-8)
        assert np.allclose(amortized_exposure(policy, exp), [1.0, 1.0], atol=1e-8)
        assert diag.duality_gap <= 1e-6 * abs(diag.objective_value) + 1e-12

    def test_toy_alpha_one(self, toy_market):
        # interior stationarity: 0.65/(0.8+0.5b) = 0.28/(0.4-0.4b) at b = 0.09
        rel, exp = toy_market
        policy, _ = solve_nsw(rel, exp, NswConfig(alpha=1.0))
        assert np.allclose(item_impact(policy, rel, exp), [0.845, 0.364], atol=1e-6)
        assert user_utility(policy, rel, exp) == pytest.approx(1.209, abs=1e-6)

    def test_toy_alpha_two(self, toy_market):
        # same stationarity with squared merit weights: b = 0.1812 / 0.436
        rel, exp = toy_market
        b = 0.1812 / 0.436
        policy, _ = solve_nsw(rel, exp, NswConfig(alpha=2.0))
        assert np.allclose(item_impact(policy, rel, exp),
                           [0.8 + 0.5 * b, 0.4 * (1 - b)], atol=1e-6)
        assert user_utility(policy, rel, exp) == pytest.approx(1.2 + 0.1 * b, abs=1e-6)

    def test_toy_utility_ordering(self, toy_market):
        rel, exp = toy_market
        u = {}
        u["nsw"] = user_utility(solve_nsw(rel, exp)[0], rel, exp)
        u["nsw1"] = user_utility(solve_nsw(rel, exp, NswConfig(alpha=1.0))[0], rel, exp)
        u["fair"] = user_utility(solve_expo_fair(rel, exp)[0], rel, exp)
        u["nsw2"] = user_utility(solve_nsw(rel, exp, NswConfig(alpha=2.0))[0], rel, exp)
        assert u["nsw"] < u["nsw1"] < u["fair"] < u["nsw2"]

    def test_exposure_only_equalizes_exposure(self):
        rng = np.random.default_rng(11)
        rel = RelevanceMatrix(rng.uniform(0.1, 1.0, (5, 4)))
        exp = ExposureModel.make("inverse", 4, 1)
        policy, _ = solve_nsw(rel, exp, vfn=XO)
        expo = amortized_exposure(policy, exp)
        assert expo.max() - expo.min() <= 1e-4

    def test_zero_merit_item_excluded(self):
        rel = RelevanceMatrix([[0.6, 0.0, 0.2], [0.4, 0.0, 0.5]])
        exp = ExposureModel.make("inverse", 3, 2)
        with pytest.warns(RuntimeWarning, match=r"\[1\]"):
            policy, diag = solve_nsw(rel, exp)
        assert_doubly_stochastic(policy)
        assert item_impact(policy, rel, exp)[1] == 0.0
        assert np.isfinite(diag.objective_value)

    def test_degenerate_market(self):
        rel = RelevanceMatrix(np.zeros((2, 2)))
        exp = ExposureModel.make("inverse", 2, 1)
        with pytest.raises(DegenerateMarketError):
            solve_nsw(rel, exp)

    def test_diminishing_schedule_converges_loosely(self, toy_market):
        rel, exp = toy_market
        cfg = NswConfig(line_search="diminishing", max_iters=3000, rel_gap_tol=1e-3)
        policy, _ = solve_nsw(rel, exp, cfg)
        assert np.allclose(item_impact(policy, rel, exp), [0.8, 0.4], atol=0.01)


class TestBruteForceOracle:
    def test_toy_nsw_objective(self, toy_market):
        rel, exp = toy_market
        val = brute_force_oracle(rel, exp, "nsw", grid_step=1e-3)
        assert val == pytest.approx(np.log(0.8) + np.log(0.4), abs=1e-3)

    def test_toy_utility(self, toy_market):
        rel, exp = toy_market
        assert brute_force_oracle(rel, exp, "utility", grid_step=1e-2) == pytest.approx(1.30)

    def test_symmetric_market_optimum_is_uniform(self):
        rel = RelevanceMatrix(np.full((2, 2), 0.5))
        exp = ExposureModel.make("inverse", 2, 1)
        val = brute_force_oracle(rel, exp, "nsw", grid_step=1e-2)
        assert val == pytest.approx(2 * np.log(0.25 / 0.5), abs=1e-9)

    def test_size_guard(self):
        rel = RelevanceMatrix(np.full((4, 2), 0.5))
        exp = ExposureModel.make("inverse", 2, 1)
        with pytest.raises(SizeError):
            brute_force_oracle(rel, exp, "nsw", grid_step=1e-3)

    def test_requires_single_slot(self):
        rel = RelevanceMatrix(np.full((2, 2), 0.5))
        exp = ExposureModel.make("inverse", 2, 2)
        with pytest.raises(SizeError):
            brute_force_oracle(rel, exp, "nsw")


class TestSolverInvariants:
    def test_outputs_doubly_stochastic(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            rel = random_market(rng)
            exp = ExposureModel.make("inverse", rel.n, min(3, rel.n))
            assert_doubly_stochastic(solve_uniform(rel.m, rel.n))
            assert_doubly_stochastic(solve_utility_max(rel, exp))
            assert_doubly_stochastic(solve_nsw(rel, exp)[0])
            assert_doubly_stochastic(solve_expo_fair(rel, exp)[0])

    def test_utility_max_dominates_other_solvers(self):
        rng = np.random.default_rng(4)
        for _ in range(5):
            rel = random_market(rng)
            exp = ExposureModel.make("inverse", rel.n, min(2, rel.n))
            top = user_utility(solve_utility_max(rel, exp), rel, exp)
            for policy in (solve_uniform(rel.m, rel.n), solve_nsw(rel, exp)[0],
                           solve_expo_fair(rel, exp)[0]):
                assert user_utility(policy, rel, exp) <= top + 1e-9

    def test_nsw_kkt_certificate(self):
        rng = np.random.default_rng(6)
        for _ in range(8):
            rel = random_market(rng)
            exp = ExposureModel.make("inverse", rel.n, min(3, rel.n))
            for alpha in (0.0, 1.0):
                cfg = NswConfig(alpha=alpha)
                _, diag = solve_nsw(rel, exp, cfg)
                assert diag.duality_gap >= -1e-9
                assert diag.duality_gap <= cfg.rel_gap_tol * abs(diag.objective_value) + 1e-12

    @pytest.mark.parametrize("m,n,grid", [(2, 2, 1e-3), (3, 2, 1e-2), (2, 3, 1e-2)])
    def test_oracle_equivalence_on_tiny_instances(self, m, n, grid):
        rng = np.random.default_rng(100 * m + n)
        exp = ExposureModel.make("inverse", n, 1)
        for _ in range(3):
            rel = RelevanceMatrix(rng.uniform(0.1, 1.0, (m, n)))
            _, diag = solve_nsw(rel, exp)
            assert diag.objective_value >= brute_force_oracle(
                rel, exp, "nsw", grid_step=grid) - 2 * grid
            policy, _ = solve_expo_fair(rel, exp)
            assert user_utility(policy, rel, exp) >= brute_force_oracle(
                rel, exp, "expo_fair", grid_step=grid) - 2 * grid

    def test_expo_fair_exposure_only_equity(self, toy_market):
        # identity link forces exposure / merit to be a constant, which is the
        # zero point of merit-weighted envy under the exposure-only impact
        rel, exp = toy_market
        policy, _ = solve_expo_fair(rel, exp)
        ratios = amortized_exposure(policy, exp) / merit(rel)
        assert ratios.max() - ratios.min() <= 1e-6
