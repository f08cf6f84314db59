import json
import subprocess
import sys

import numpy as np
import pytest

from eqodds.binary import derive
from eqodds.cli import main
from eqodds.joint import LossSpec, SampleTable, read_samples
from eqodds.score import optimize


@pytest.fixture
def binary_csv(tmp_path):
    rng = np.random.default_rng(31)
    n = 4_000
    a = rng.integers(0, 2, n)
    y = rng.integers(0, 2, n)
    yhat = np.where(rng.random(n) < 0.7 + 0.1 * a, y, 1 - y)
    path = tmp_path / "binary.csv"
    SampleTable.from_arrays(np.where(a == 1, "b", "a").astype(object), yhat, y).write_csv(path)
    return path


@pytest.fixture
def score_csv(tmp_path):
    rng = np.random.default_rng(32)
    n = 3_000
    a = rng.integers(0, 2, n)
    y = rng.integers(0, 2, n)
    r = np.round(y + 0.5 * a + rng.standard_normal(n), 1)
    path = tmp_path / "score.csv"
    SampleTable.from_arrays(np.where(a == 1, "b", "a").astype(object), r, y).write_csv(path)
    return path


def run_json(argv, out):
    code = main([*argv, "--out", str(out)])
    return code, json.loads(out.read_text())


class TestAudit:
    def test_exit_codes(self, tmp_path):
        assert main(["scenario", "1", "--n", "20000", "--seed", "1", "--score", "r_star", "--out", str(tmp_path / "s.csv")]) == 0
        code, report = run_json(["audit", str(tmp_path / "s.csv"), "--kind", "score", "--criteria", "equalized_odds"], tmp_path / "a.json")
        assert code == 1 and not report["all_passed"]
        code, _ = run_json(["audit", str(tmp_path / "s.csv"), "--kind", "score", "--criteria", "equalized_odds", "--tol", "1"], tmp_path / "b.json")
        assert code == 0

    def test_binary_report(self, binary_csv, tmp_path):
        code, report = run_json(["audit", str(binary_csv), "--kind", "binary"], tmp_path / "a.json")
        assert code in (0, 1)
        assert "identical_roc" not in report["checks"]
        assert "equalized_odds" in report["checks"]

    def test_parse_error_names_line(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("group,score_or_pred,outcome\na,0.1,1\na,zz,0\n")
        assert main(["audit", str(bad), "--kind", "score"]) == 2
        assert "line 3" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["audit", str(tmp_path / "none.csv"), "--kind", "score"]) == 2

    def test_stdout_when_no_out(self, binary_csv, capsys):
        main(["audit", str(binary_csv), "--kind", "binary", "--criteria", "equal_opportunity"])
        assert json.loads(capsys.readouterr().out)["kind"] == "audit_report"


class TestAdjust:
    def test_binary_matches_library(self, binary_csv, tmp_path):
        code, data = run_json(["adjust", str(binary_csv), "--kind", "binary", "--criterion", "equalized_odds", "--cost-fp", "0.4", "--cost-fn", "0.6"], tmp_path / "o.json")
        lib = derive(read_samples(binary_csv, "binary"), LossSpec(0.4, 0.6), "equalized_odds")
        assert code == 0
        assert data["expected_loss"] == pytest.approx(lib.expected_loss, abs=1e-15)
        assert data["closed_loop"]["passed"]

    def test_score_matches_library(self, score_csv, tmp_path):
        code, data = run_json(["adjust", str(score_csv), "--kind", "score", "--criterion", "equal_opportunity"], tmp_path / "o.json")
        lib = optimize(read_samples(score_csv, "score"), LossSpec(1, 1), "equal_opportunity")
        assert code == 0 and data["expected_loss"] == pytest.approx(lib.expected_loss, abs=1e-15)
        assert data["closed_loop"]["passed"]

    def test_binary_rejects_score_regime(self, binary_csv):
        assert main(["adjust", str(binary_csv), "--kind", "binary", "--criterion", "demographic_parity"]) == 2

    def test_degenerate_loss(self, binary_csv):
        assert main(["adjust", str(binary_csv), "--kind", "binary", "--criterion", "equalized_odds", "--cost-fp", "0", "--cost-fn", "0"]) == 2

    def test_bad_criterion_is_usage_error(self, binary_csv):
        with pytest.raises(SystemExit) as info:
            main(["adjust", str(binary_csv), "--kind", "binary", "--criterion", "fairest"])
        assert info.value.code == 2


class TestScenario:
    def test_deterministic_output(self, tmp_path):
        for name in ("x.csv", "y.csv"):
            assert main(["scenario", "2", "--n", "500", "--seed", "9", "--out", str(tmp_path / name)]) == 0
        assert (tmp_path / "x.csv").read_bytes() == (tmp_path / "y.csv").read_bytes()
        meta = json.loads((tmp_path / "x.meta.json").read_text())
        assert meta["seed"] == 9 and meta["scenario"] == 2

    def test_output_is_ingestible(self, tmp_path):
        main(["scenario", "1", "--n", "300", "--seed", "2", "--score", "r_tilde", "--out", str(tmp_path / "s.csv")])
        dist = read_samples(tmp_path / "s.csv", "score")
        assert set(dist.groups) == {"a=-1", "a=+1"}

    def test_zero_samples(self, tmp_path):
        assert main(["scenario", "1", "--n", "0", "--out", str(tmp_path / "s.csv")]) == 2


class TestCaseStudy:
    def test_shipped_default(self, tmp_path, capsys):
        assert main(["casestudy", "--out", str(tmp_path), "--sweep", "0.8", "0.84", "0.02"]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["profit_fraction"]["max_profit"] == pytest.approx(1.0)
        assert "synthetic" in summary["source"]
        ordering = json.loads((tmp_path / "ordering.json").read_text())
        assert all(v["passed"] for v in ordering.values())
        assert len((tmp_path / "profit_curve.csv").read_text().splitlines()) == 4

    def test_subset_of_regimes(self, tmp_path):
        assert main(["casestudy", "--out", str(tmp_path), "--regimes", "equal_opportunity", "--sweep", "0.8", "0.8", "0.01"]) == 0
        assert not (tmp_path / "ordering.json").exists()


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "eqodds", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "casestudy" in out.stdout
