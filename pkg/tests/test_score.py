import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_score
from eqodds.geometry import Fixed, Mixture
from eqodds.joint import ConditionalScoreDistribution, LossSpec
from eqodds.score import (
    REGIMES,
    RandomizedThresholdPolicy,
    apply_policy,
    optimize,
    policy_from_report_dict,
    policy_joint,
    policy_loss,
    policy_rates,
    ternary_search,
)
from oracles import (
    grid_demographic_parity,
    grid_equal_opportunity,
    lp_oracle_score,
    random_score_instance,
    sweep_group_blind,
    sweep_max_profit,
)


def instance(seed, n_support=None, k=2):
    rng = np.random.default_rng(seed)
    support, raw = random_score_instance(rng, n_support, k)
    raw = raw / raw.sum()
    w = raw.sum(axis=2)
    dist = ConditionalScoreDistribution.from_joint_masses([f"g{i}" for i in range(k)], support, raw)
    return dist, support, raw / w[:, :, None], w, rng


def oracle(criterion, support, cond, w, cfp, cfn):
    if criterion == "max_profit":
        return sweep_max_profit(support, cond, w, cfp, cfn)
    if criterion == "group_blind":
        return sweep_group_blind(support, cond, w, cfp, cfn)
    return lp_oracle_score(support, cond, w, cfp, cfn, criterion)


class TestTernarySearch:
    def test_brackets_quadratic_minimum(self):
        lo, hi, it = ternary_search(lambda x: (x - 0.3) ** 2, 0.0, 1.0)
        assert hi - lo <= 1e-9
        assert lo <= 0.3 + 1e-9 and hi >= 0.3 - 1e-9
        assert it <= 200


class TestAgainstOracles:
    @pytest.mark.parametrize("criterion", REGIMES)
    def test_random_instances(self, criterion):
        for seed in range(15):
            dist, support, cond, w, rng = instance(seed)
            cfp, cfn = rng.uniform(0.05, 1.0, 2)
            rep = optimize(dist, LossSpec(cfp, cfn), criterion)
            assert rep.expected_loss == pytest.approx(oracle(criterion, support, cond, w, cfp, cfn), abs=1e-7)
            assert rep.satisfied

    def test_brute_force_grids(self):
        for seed in range(4):
            dist, support, cond, w, _ = instance(100 + seed, n_support=8)
            loss = LossSpec(0.7, 0.4)
            eopp = optimize(dist, loss, "equal_opportunity").expected_loss
            dp = optimize(dist, loss, "demographic_parity").expected_loss
            assert eopp == pytest.approx(grid_equal_opportunity(support, cond, w, 0.7, 0.4), abs=1e-4)
            assert dp == pytest.approx(grid_demographic_parity(support, cond, w, 0.7, 0.4), abs=1e-4)

    def test_three_groups(self):
        dist, support, cond, w, _ = instance(7, k=3)
        for criterion in REGIMES:
            rep = optimize(dist, LossSpec(0.5, 0.5), criterion)
            assert rep.expected_loss == pytest.approx(oracle(criterion, support, cond, w, 0.5, 0.5), abs=1e-7)


class TestStructure:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.integers(2, 3), st.floats(0.05, 1), st.floats(0.05, 1))
    def test_loss_ordering_and_constraints(self, seed, k, cfp, cfn):
        dist = random_score(np.random.default_rng(seed), k=k)
        loss = LossSpec(cfp, cfn)
        reps = {c: optimize(dist, loss, c) for c in REGIMES}
        mp = reps["max_profit"].expected_loss
        for c in REGIMES:
            assert reps[c].expected_loss >= mp - 1e-12
        assert reps["equal_opportunity"].expected_loss <= reps["equalized_odds"].expected_loss + 1e-12
        rates = np.array(reps["equalized_odds"].rates)
        assert np.ptp(rates, axis=0).max() <= 1e-6
        assert np.ptp(np.array(reps["equal_opportunity"].rates)[:, 1]) <= 1e-6
        assert np.ptp(reps["demographic_parity"].acceptance) <= 1e-9

    def test_identical_groups_reduce_to_max_profit(self, rng):
        masses = rng.random((1, 2, 12))
        joint = np.repeat(masses, 2, axis=0)
        dist = ConditionalScoreDistribution.from_joint_masses(["a", "b"], np.arange(12.0), joint)
        loss = LossSpec(0.6, 0.4)
        mp = optimize(dist, loss, "max_profit").expected_loss
        for c in ("equalized_odds", "equal_opportunity", "demographic_parity", "group_blind"):
            assert optimize(dist, loss, c).expected_loss == pytest.approx(mp, abs=1e-12)

    def test_noise_group_forces_diagonal(self, rng):
        masses = rng.random((2, 2, 10))
        masses[1, 1] = masses[1, 0]  # score carries no signal in group b
        dist = ConditionalScoreDistribution.from_joint_masses(["a", "b"], np.arange(10.0), masses)
        rep = optimize(dist, LossSpec(1.0, 1.0), "equalized_odds")
        for fpr, tpr in rep.rates:
            assert fpr == pytest.approx(tpr, abs=1e-9)

    def test_rates_reproduce_from_policy(self, rng):
        dist = random_score(rng, 25)
        rep = optimize(dist, LossSpec(0.3, 0.7), "equalized_odds")
        assert np.allclose(policy_rates(dist, rep.policy), rep.rates, atol=1e-12)
        assert policy_loss(dist, rep.policy, rep.loss) == pytest.approx(rep.expected_loss, abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_tpr_monotone_in_cost_of_misses(self, seed):
        dist = random_score(np.random.default_rng(seed))
        prev = -1.0
        for cfn in (0.1, 0.3, 0.5, 0.7, 0.9):
            rep = optimize(dist, LossSpec(1 - cfn, cfn), "equalized_odds")
            tpr = rep.rates[0][1]
            assert tpr >= prev - 1e-9
            prev = tpr

    def test_policy_joint_matches_rates(self, rng):
        dist = random_score(rng)
        rep = optimize(dist, LossSpec(0.5, 0.5), "demographic_parity")
        joint = policy_joint(dist, rep.policy)
        for a in range(2):
            c = joint.cells[a]
            assert c[1, 1] / c[:, 1].sum() == pytest.approx(rep.rates[a][1], abs=1e-12)

    def test_unknown_regime(self, rng):
        with pytest.raises(ValueError):
            optimize(random_score(rng), LossSpec(1, 1), "calibration")


class TestApplyPolicy:
    def test_mixture_frequency(self):
        policy = RandomizedThresholdPolicy(("a", "b"), (Mixture(1.0, 2.0, 0.25), Fixed(0.0)))
        r = np.full(1_000_000, 1.5)
        decided = apply_policy(policy, r, "a", np.random.default_rng(3))
        assert abs(decided.mean() - 0.25) < 0.002

    def test_fixed_is_deterministic(self, rng):
        policy = RandomizedThresholdPolicy(("a", "b"), (Fixed(0.5), Fixed(0.5)))
        out = apply_policy(policy, [0.4, 0.5, 0.6], ["a", "b", "a"], rng)
        assert out.tolist() == [0, 0, 1]

    def test_scalar_returns_int(self, rng):
        policy = RandomizedThresholdPolicy(("a", "b"), (Fixed(0.5), Fixed(0.5)))
        assert apply_policy(policy, 0.9, "b", rng) == 1


class TestSerialisation:
    def test_round_trip(self, rng):
        dist = random_score(rng, 30)
        rep = optimize(dist, LossSpec(0.4, 0.6), "equal_opportunity")
        data = json.loads(rep.to_json())
        assert data["kind"] == "policy_report" and data["schema_version"] == 1
        back = policy_from_report_dict(data)
        assert back == rep.policy

    def test_infinite_thresholds_serialise(self):
        policy = RandomizedThresholdPolicy(("a", "b"), (Fixed(np.inf), Fixed(-np.inf)))
        back = RandomizedThresholdPolicy.from_dict(json.loads(json.dumps(policy.to_dict())))
        assert back == policy
