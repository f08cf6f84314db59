import json

import numpy as np
import pytest

from eqodds.casestudy import (
    MarginalsTable,
    load_input,
    load_shipped_synthetic,
    ordering_check,
    profit,
    reject_all_loss,
    run_case_study,
    sweep_rates,
    synthetic_fico_marginals,
    threshold_percentile,
    write_outputs,
)
from eqodds.errors import ParseError
from eqodds.geometry import Fixed, Mixture
from eqodds.joint import LossSpec
from eqodds.score import REGIMES, optimize

HEADER = "group,score,cdf,nondefault_rate,group_size\n"


@pytest.fixture(scope="module")
def synthetic():
    return load_shipped_synthetic().to_distribution()


@pytest.fixture(scope="module")
def result(synthetic):
    return run_case_study(synthetic, sweep=np.array([0.6, 0.82, 0.95]))


def write(tmp_path, body):
    path = tmp_path / "m.csv"
    path.write_text(HEADER + body)
    return path


class TestMarginals:
    def test_parse_and_convert(self, tmp_path):
        path = write(tmp_path, "x,1,0.25,0.2,100\nx,2,1.0,0.8,100\ny,1,0.5,0.4,50\ny,3,1.0,0.9,50\n")
        dist = MarginalsTable.read_csv(path).to_distribution()
        assert dist.support.tolist() == [1.0, 2.0, 3.0]
        # group x: 25 people at score 1 (5 repay), 75 at score 2 (60 repay)
        assert dist.masses[0, 1].tolist() == pytest.approx([5 / 65, 60 / 65, 0.0])
        assert dist.cell_weights.sum() == pytest.approx(1.0)
        assert dist.cell_weights[0].sum() == pytest.approx(100 / 150)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("group,score\n")
        with pytest.raises(ParseError, match="line 1"):
            MarginalsTable.read_csv(path)

    def test_bad_value_reports_line(self, tmp_path):
        with pytest.raises(ParseError, match="line 3"):
            MarginalsTable.read_csv(write(tmp_path, "x,1,0.5,0.2,10\nx,2,one,0.8,10\n"))

    def test_cdf_must_end_at_one(self, tmp_path):
        with pytest.raises(ValueError):
            MarginalsTable.read_csv(write(tmp_path, "x,1,0.5,0.2,10\nx,2,0.9,0.8,10\n"))

    def test_decreasing_cdf(self, tmp_path):
        with pytest.raises(ValueError):
            MarginalsTable.read_csv(write(tmp_path, "x,1,0.6,0.2,10\nx,2,0.5,0.8,10\nx,3,1.0,0.9,10\n"))

    def test_group_size_must_be_constant(self, tmp_path):
        with pytest.raises(ParseError):
            MarginalsTable.read_csv(write(tmp_path, "x,1,0.5,0.2,10\nx,2,1.0,0.8,11\n"))

    def test_load_input_detects_format(self, tmp_path):
        samples = tmp_path / "s.csv"
        samples.write_text("group,score_or_pred,outcome\na,0.1,0\na,0.9,1\nb,0.2,0\nb,0.7,1\n")
        assert load_input(samples).groups == ("a", "b")
        marg = write(tmp_path, "x,1,0.5,0.2,10\nx,2,1.0,0.8,10\n")
        assert load_input(marg).groups == ("x",)


class TestSynthetic:
    def test_shipped_file_matches_generator(self):
        shipped, fresh = load_shipped_synthetic(), synthetic_fico_marginals()
        assert shipped.groups == fresh.groups
        for g in fresh.groups:
            assert np.allclose(shipped.cdf[g], fresh.cdf[g], atol=1e-15)
            assert np.allclose(shipped.nondefault_rate[g], fresh.nondefault_rate[g], atol=1e-15)

    def test_labelled_synthetic(self):
        assert all(g.startswith("synthetic") for g in load_shipped_synthetic().groups)

    def test_round_trip(self, tmp_path):
        table = synthetic_fico_marginals()
        table.write_csv(tmp_path / "m.csv")
        back = MarginalsTable.read_csv(tmp_path / "m.csv")
        assert np.array_equal(back.cdf["synthetic-B"], table.cdf["synthetic-B"])


class TestCaseStudy:
    def test_single_group_is_full_profit(self, tmp_path):
        dist = MarginalsTable.read_csv(write(tmp_path, "x,1,0.3,0.1,10\nx,2,0.6,0.85,10\nx,3,1.0,0.95,10\n")).to_distribution()
        res = run_case_study(dist, sweep=[0.82])
        for r in REGIMES:
            assert res.profit_fraction[r] == pytest.approx(1.0, abs=1e-12)

    def test_fractions_bounded(self, result):
        for r in REGIMES:
            assert result.profit_fraction[r] <= 1.0 + 1e-12
            assert all(v is None or v <= 1.0 + 1e-12 for v in result.sweep_fraction[r])

    def test_loss_ordering(self, result):
        loss = {r: result.reports[r].expected_loss for r in REGIMES}
        assert loss["max_profit"] <= loss["equal_opportunity"] + 1e-12
        assert loss["equal_opportunity"] <= loss["equalized_odds"] + 1e-12
        assert loss["max_profit"] <= loss["group_blind"] + 1e-12

    def test_threshold_ordering(self, result):
        assert all(v["passed"] for v in ordering_check(result).values())

    def test_profit_definition(self, synthetic):
        loss = LossSpec.from_break_even(0.82)
        rep = optimize(synthetic, loss, "max_profit")
        assert profit(synthetic, rep) == pytest.approx(reject_all_loss(synthetic, loss) - rep.expected_loss)
        assert profit(synthetic, rep) > 0

    def test_percentile_of_mixture(self, synthetic):
        cdf = lambda t: float(synthetic.group_cdf(0, t))  # noqa: E731
        rule = Mixture(600.0, 700.0, 0.25)
        assert threshold_percentile(synthetic, 0, rule) == pytest.approx(0.75 * cdf(700.0) + 0.25 * cdf(600.0))
        assert threshold_percentile(synthetic, 0, Fixed(700.0)) == pytest.approx(cdf(700.0))

    def test_deterministic(self, synthetic, result):
        again = run_case_study(synthetic, sweep=np.array([0.6, 0.82, 0.95]))
        assert again.profit_fraction == result.profit_fraction

    def test_sweep_grid(self):
        s = sweep_rates()
        assert len(s) == 50 and s[0] == 0.5 and s[-1] == 0.99

    def test_rejects_empty_regimes(self, synthetic):
        with pytest.raises(ValueError):
            run_case_study(synthetic, regimes=[])

    def test_outputs(self, result, tmp_path):
        files = write_outputs(result, tmp_path)
        assert {f.name for f in files} == {"thresholds.csv", "tpr.csv", "profit_curve.csv", "report.json"}
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["kind"] == "case_study" and set(report["profit_fraction"]) == set(REGIMES)
        lines = (tmp_path / "profit_curve.csv").read_text().splitlines()
        assert len(lines) == 4
