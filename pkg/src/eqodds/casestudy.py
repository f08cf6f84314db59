"""Credit-score case study: five threshold regimes on per-group score marginals.

Input is a long-format marginals table with one row per (group, score):

    group,score,cdf,nondefault_rate,group_size

``cdf`` is the fraction of the group scoring at or below ``score``,
``nondefault_rate`` the fraction of those scoring exactly ``score`` who
repay, and ``group_size`` the number of people in the group (constant
within a group). Outcome 1 means the loan is repaid, so accepting a
defaulter is a false positive. At break-even rate ``b`` a loan is
profitable exactly when the repayment probability exceeds ``b``, which is
the loss ``cost_fp = b``, ``cost_fn = 1 - b``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import expit
from scipy.stats import norm

from .errors import ParseError
from .geometry import Fixed, _json_threshold
from .joint import ConditionalScoreDistribution, LossSpec, read_samples
from .score import REGIMES, PolicyReport, optimize

MARGINALS_HEADER = ["group", "score", "cdf", "nondefault_rate", "group_size"]
DEFAULT_BREAK_EVEN = 0.82
DEFAULT_SWEEP = (0.50, 0.99, 0.01)
CDF_TOL = 1e-9
SYNTHETIC_FILE = "synthetic_fico_marginals.csv"


@dataclass(frozen=True)
class MarginalsTable:
    groups: tuple
    scores: dict
    cdf: dict
    nondefault_rate: dict
    group_size: dict

    def __post_init__(self):
        for g in self.groups:
            s, c, r = self.scores[g], self.cdf[g], self.nondefault_rate[g]
            if np.any(np.diff(s) <= 0):
                raise ValueError(f"group {g}: scores must be strictly increasing")
            if np.any(np.diff(c) < -CDF_TOL) or np.any(c < -CDF_TOL):
                raise ValueError(f"group {g}: cumulative fractions must be nondecreasing")
            if abs(c[-1] - 1.0) > 1e-6:
                raise ValueError(f"group {g}: cumulative fraction must end at 1, got {c[-1]!r}")
            if np.any((r < 0) | (r > 1)):
                raise ValueError(f"group {g}: non-default rates must lie in [0, 1]")
            if self.group_size[g] <= 0:
                raise ValueError(f"group {g}: group size must be positive")

    @classmethod
    def read_csv(cls, path) -> "MarginalsTable":
        rows: dict = {}
        sizes: dict = {}
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != MARGINALS_HEADER:
                raise ParseError(f"expected header {','.join(MARGINALS_HEADER)}", line=1)
            for lineno, row in enumerate(reader, start=2):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != len(MARGINALS_HEADER):
                    raise ParseError(f"expected {len(MARGINALS_HEADER)} fields, got {len(row)}", line=lineno)
                g = row[0].strip()
                try:
                    vals = [float(v) for v in row[1:]]
                except ValueError as exc:
                    raise ParseError(str(exc), line=lineno) from None
                if not all(math.isfinite(v) for v in vals):
                    raise ParseError("non-finite value", line=lineno)
                if g in sizes and sizes[g] != vals[3]:
                    raise ParseError(f"group {g}: group_size changes within the group", line=lineno)
                sizes[g] = vals[3]
                rows.setdefault(g, []).append(vals[:3])
        if not rows:
            raise ParseError("no data rows", line=2)
        groups = tuple(rows)
        arr = {g: np.asarray(sorted(rows[g])) for g in groups}
        return cls(
            groups,
            {g: arr[g][:, 0] for g in groups},
            {g: arr[g][:, 1] for g in groups},
            {g: arr[g][:, 2] for g in groups},
            sizes,
        )

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(MARGINALS_HEADER)
            for g in self.groups:
                for s, c, r in zip(self.scores[g], self.cdf[g], self.nondefault_rate[g]):
                    w.writerow([g, repr(float(s)), repr(float(c)), repr(float(r)), repr(float(self.group_size[g]))])

    def to_distribution(self) -> ConditionalScoreDistribution:
        """Weighted (group, score, outcome) masses on the union of score values."""
        support = np.unique(np.concatenate([self.scores[g] for g in self.groups]))
        mass = np.zeros((len(self.groups), 2, support.size))
        for a, g in enumerate(self.groups):
            pmf = np.clip(np.diff(np.concatenate([[0.0], self.cdf[g]])), 0.0, None)
            people = pmf / pmf.sum() * self.group_size[g]
            idx = np.searchsorted(support, self.scores[g])
            mass[a, 1, idx] += people * self.nondefault_rate[g]
            mass[a, 0, idx] += people * (1.0 - self.nondefault_rate[g])
        return ConditionalScoreDistribution.from_joint_masses(self.groups, support, mass)


def synthetic_fico_marginals() -> MarginalsTable:
    """Deterministic FICO-like marginals for four synthetic groups.

    Scores run from 300 to 850 in steps of 5. Each group's score is a
    discretised normal with its own centre and spread. Repayment follows
    one logistic curve in the score for every group, as a credit score is
    meant to carry the same odds whoever holds it. Group sizes and the
    order of group means loosely follow published credit-bureau summaries;
    none of the numbers come from real credit data.
    """
    scores = np.arange(300.0, 851.0, 5.0)
    params = {
        "synthetic-A": (705.0, 75.0, 133_000),
        "synthetic-B": (585.0, 80.0, 18_000),
        "synthetic-C": (645.0, 80.0, 15_000),
        "synthetic-D": (725.0, 70.0, 8_000),
    }
    edges = np.concatenate([[-np.inf], scores[:-1] + 2.5, [np.inf]])
    groups = tuple(params)
    cdf, rate, size = {}, {}, {}
    for g, (mu, sd, n) in params.items():
        pmf = np.diff(norm.cdf(edges, loc=mu, scale=sd))
        cdf[g] = np.cumsum(pmf) / pmf.sum()
        cdf[g][-1] = 1.0
        rate[g] = expit((scores - 600.0) / 40.0)
        size[g] = float(n)
    return MarginalsTable(groups, {g: scores.copy() for g in groups}, cdf, rate, size)


def load_shipped_synthetic() -> MarginalsTable:
    with resources.as_file(resources.files("eqodds") / "data" / SYNTHETIC_FILE) as p:
        return MarginalsTable.read_csv(p)


def load_input(path) -> ConditionalScoreDistribution:
    """Marginals CSV or samples CSV, told apart by the header."""
    with open(path, newline="") as fh:
        header = [h.strip() for h in (next(csv.reader(fh), None) or [])]
    if header == MARGINALS_HEADER:
        return MarginalsTable.read_csv(path).to_distribution()
    return read_samples(path, "score")


def sweep_rates(start=DEFAULT_SWEEP[0], stop=DEFAULT_SWEEP[1], step=DEFAULT_SWEEP[2]) -> np.ndarray:
    n = int(round((stop - start) / step)) + 1
    return np.round(start + step * np.arange(n), 10)


def reject_all_loss(dist: ConditionalScoreDistribution, loss: LossSpec) -> float:
    return float(loss.cost_fn * dist.cell_weights[:, 1].sum())


def profit(dist: ConditionalScoreDistribution, report: PolicyReport) -> float:
    """Loss avoided relative to refusing every applicant."""
    return reject_all_loss(dist, report.loss) - report.expected_loss


def threshold_percentile(dist: ConditionalScoreDistribution, a, rule) -> float:
    """Expected within-group fraction scoring at or below the rule's threshold."""
    return rule.average_threshold_cdf(lambda t: float(dist.group_cdf(a, t)))


@dataclass(frozen=True)
class CaseStudyResult:
    break_even: float
    regimes: tuple
    reports: dict
    profit_fraction: dict
    sweep: np.ndarray
    sweep_fraction: dict
    notes: tuple = ()
    dist: ConditionalScoreDistribution | None = field(default=None, compare=False, repr=False)

    def thresholds_rows(self) -> list[dict]:
        rows = []
        for regime in self.regimes:
            rep = self.reports[regime]
            for a, g in enumerate(rep.policy.groups):
                rule = rep.policy.rules[a]
                fixed = isinstance(rule, Fixed)
                rows.append(
                    {
                        "regime": regime,
                        "group": g,
                        "kind": "fixed" if fixed else "mixture",
                        "threshold": _json_threshold(rule.threshold) if fixed else "",
                        "low": "" if fixed else _json_threshold(rule.low),
                        "high": "" if fixed else _json_threshold(rule.high),
                        "p_low": "" if fixed else rule.p_low,
                        "p_floor": "" if fixed else rule.p_floor,
                        "avg_percentile": threshold_percentile(self.dist, a, rule),
                    }
                )
        return rows

    def tpr_rows(self) -> list[dict]:
        return [
            {"regime": r, "group": g, "tpr": self.reports[r].rates[a][1], "fpr": self.reports[r].rates[a][0]}
            for r in self.regimes
            for a, g in enumerate(self.reports[r].policy.groups)
        ]

    def profit_rows(self) -> list[dict]:
        rows = []
        for i, b in enumerate(self.sweep):
            row = {"break_even": float(b)}
            for r in self.regimes:
                row[r] = self.sweep_fraction[r][i]
            rows.append(row)
        return rows

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "kind": "case_study",
            "break_even": self.break_even,
            "regimes": list(self.regimes),
            "profit_fraction": {r: _nan_to_none(v) for r, v in self.profit_fraction.items()},
            "reports": {r: self.reports[r].to_dict() for r in self.regimes},
            "notes": list(self.notes),
        }


def _nan_to_none(v):
    return None if v is None or (isinstance(v, float) and math.isnan(v)) else v


def _fractions(dist, reports: dict) -> dict:
    base = profit(dist, reports["max_profit"])
    if base <= 0:
        return {r: float("nan") for r in reports}
    return {r: profit(dist, rep) / base for r, rep in reports.items()}


def run_case_study(
    dist: ConditionalScoreDistribution,
    *,
    break_even: float = DEFAULT_BREAK_EVEN,
    regimes: Sequence[str] = REGIMES,
    sweep: np.ndarray | None = None,
) -> CaseStudyResult:
    regimes = tuple(regimes)
    unknown = [r for r in regimes if r not in REGIMES]
    if unknown or not regimes:
        raise ValueError(f"regimes must be a non-empty subset of {REGIMES}")
    needed = tuple(dict.fromkeys(("max_profit",) + regimes))
    sweep = sweep_rates() if sweep is None else np.asarray(sweep, dtype=float)

    def solve(b):
        loss = LossSpec.from_break_even(b)
        return {r: optimize(dist, loss, r) for r in needed}

    reports = solve(break_even)
    fractions = _fractions(dist, reports)
    sweep_fraction = {r: [] for r in regimes}
    notes = []
    for b in sweep:
        fr = _fractions(dist, solve(float(b)))
        for r in regimes:
            sweep_fraction[r].append(_nan_to_none(fr[r]))
    if math.isnan(fractions["max_profit"]):
        notes.append("max-profit policy earns nothing at this break-even rate; fractions undefined")
    return CaseStudyResult(
        break_even=break_even,
        regimes=regimes,
        reports={r: reports[r] for r in regimes},
        profit_fraction={r: fractions[r] for r in regimes},
        sweep=sweep,
        sweep_fraction=sweep_fraction,
        notes=tuple(notes),
        dist=dist,
    )


def write_outputs(result: CaseStudyResult, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for name, rows in (
        ("thresholds.csv", result.thresholds_rows()),
        ("tpr.csv", result.tpr_rows()),
        ("profit_curve.csv", result.profit_rows()),
    ):
        path = out / name
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            for row in rows:
                w.writerow({k: ("" if v is None else v) for k, v in row.items()})
        files.append(path)
    path = out / "report.json"
    path.write_text(json.dumps(result.to_dict(), indent=2, sort_keys=True) + "\n")
    files.append(path)
    return files


def ordering_check(result: CaseStudyResult, tol: float = 1e-9) -> dict:
    """Per group: are the equal-opportunity and average equalized-odds
    percentiles between the max-profit and demographic-parity ones?"""
    dist = result.dist
    out = {}
    for a, g in enumerate(dist.groups):
        pct = {r: threshold_percentile(dist, a, result.reports[r].policy.rules[a]) for r in REGIMES}
        lo = min(pct["max_profit"], pct["demographic_parity"]) - tol
        hi = max(pct["max_profit"], pct["demographic_parity"]) + tol
        ok = all(lo <= pct[r] <= hi for r in ("equal_opportunity", "equalized_odds"))
        out[g] = {"percentiles": pct, "passed": ok}
    return out
