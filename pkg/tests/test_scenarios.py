import numpy as np
import pytest
from scipy.special import expit

from eqodds.scenarios import (
    GROUPS,
    compare_samples,
    ks_band,
    sample_scenario,
    sample_scenario_one,
    sample_scenario_two,
    unidentifiability_check,
)

BIG = 1_000_000


@pytest.fixture(scope="module")
def one():
    return sample_scenario_one(BIG, seed=21)


@pytest.fixture(scope="module")
def two():
    return sample_scenario_two(BIG, seed=22)


class TestScenarioOne:
    def test_identities(self, one):
        x1, x2 = one.features["x1"], one.features["x2"]
        assert np.array_equal(x1, one.a)
        assert np.array_equal(one.r_star, x1 + x2)
        assert np.array_equal(one.r_tilde, x2)
        # exact up to the rounding of (x2 + a) - x2
        assert np.max(np.abs(one.r_star - one.r_tilde - one.a)) <= 1e-12

    def test_outcome_rate(self, one):
        assert abs(np.mean(one.y[one.a == 1] == 1) - expit(2.0)) < 0.001

    def test_feature_is_noisy_outcome(self, one):
        assert abs(one.features["x2"][one.y == 1].mean() - 1.0) < 0.005
        assert abs(one.features["x2"][one.y == -1].std() - 1.0) < 0.005

    def test_values_are_signed(self, one):
        assert set(np.unique(one.a)) == {-1, 1}
        assert set(np.unique(one.y)) == {-1, 1}


class TestScenarioTwo:
    def test_identities(self, two):
        assert np.array_equal(two.r_star, two.features["x3"])
        assert np.max(np.abs(two.r_tilde + two.a - two.r_star)) <= 1e-12

    def test_mixture_weight(self, two):
        upper = two.features["component"][two.a == 1] == 1
        assert abs(upper.mean() - expit(2.0)) < 0.001

    def test_component_means(self, two):
        x3, comp = two.features["x3"], two.features["component"]
        for a in (-1, 1):
            for c in (-1, 1):
                assert abs(x3[(two.a == a) & (comp == c)].mean() - (a + c)) < 0.01

    def test_outcome_balanced_near_zero(self, two):
        near = np.abs(two.features["x3"]) < 0.05
        assert abs(np.mean(two.y[near] == 1) - 0.5) < 0.02


class TestOptimalScores:
    def test_noise_lowers_the_curve(self, one):
        # R* is the Bayes-optimal score; an extra noise term can only hurt
        from eqodds.geometry import achievable_region, conditional_roc

        n = 100_000
        rng = np.random.default_rng(8)
        base = sample_scenario_one(n, 9)
        noisy = type(base)(base.which, base.seed, base.a, base.y, base.features, base.r_star + rng.standard_normal(n), base.r_tilde)
        d_star, d_noisy = base.to_distribution("r_star"), noisy.to_distribution("r_star")
        for g in GROUPS:
            assert achievable_region(conditional_roc(d_star, g)).area > achievable_region(conditional_roc(d_noisy, g)).area


class TestSampling:
    def test_seeded(self):
        s1, s2 = sample_scenario(2, 1_000, 7), sample_scenario(2, 1_000, 7)
        assert np.array_equal(s1.r_star, s2.r_star) and np.array_equal(s1.y, s2.y)

    def test_rejects_bad_n(self):
        with pytest.raises(ValueError):
            sample_scenario_one(0, 1)
        with pytest.raises(ValueError):
            sample_scenario(3, 10, 1)

    def test_records_and_table(self):
        s = sample_scenario_one(50, 3)
        rec = next(s.records())
        assert rec.x3 is None and rec.r_star == rec.x1 + rec.x2
        table = s.to_table("r_tilde")
        assert set(table.group) <= set(GROUPS)
        assert set(np.unique(table.outcome)) <= {0, 1}

    def test_metadata(self):
        meta = sample_scenario_two(10, 4).metadata()
        assert meta["scenario"] == 2 and meta["seed"] == 4 and meta["n"] == 10


class TestUnidentifiability:
    def test_band_formula(self):
        assert ks_band(100, 100) == pytest.approx(1.63 * np.sqrt(0.02))

    def test_scenarios_agree(self):
        report = unidentifiability_check(100_000, 1, 2)
        assert report.passed
        assert all(0.0 <= v["statistic"] <= 1.0 for v in report.ks.values())
        assert len(report.ks) == 8 and len(report.cells) == 4

    def test_band_is_calibrated_under_the_null(self):
        # scenario I against itself: about 1% of statistics exceed the band
        exceed = total = 0
        for seed in range(25):
            rep = compare_samples(sample_scenario_one(20_000, 2 * seed), sample_scenario_one(20_000, 2 * seed + 1))
            exceed += sum(not v["passed"] for v in rep.ks.values())
            total += len(rep.ks)
        assert exceed / total <= 0.04

    def test_detects_a_different_process(self):
        s1 = sample_scenario_one(20_000, 5)
        s2 = sample_scenario_one(20_000, 6)
        shifted = type(s2)(s2.which, s2.seed, s2.a, s2.y, s2.features, s2.r_star + 0.1, s2.r_tilde + 0.1)
        assert not compare_samples(s1, shifted).passed
