"""Loss-optimal threshold policies for a real-valued score.

Five regimes share one cost model: the expected loss of a policy with
group rates ``(fpr_a, tpr_a)`` is

    sum_a  cost_fp * Pr{A=a, Y=0} * fpr_a + cost_fn * Pr{A=a, Y=1} * (1 - tpr_a).

Every group's reachable rates form the region under the upper concave hull
of its ROC curve, so each constrained problem reduces to a convex
one-dimensional search over a piecewise-linear curve. The search is a
ternary search, finished by snapping to the exact breakpoint inside the
final bracket (a piecewise-linear convex function attains its minimum at
a breakpoint).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .geometry import (
    FEASIBILITY_SLACK,
    FeasibleRegion,
    Fixed,
    Mixture,
    ThresholdRule,
    _json_threshold,
    achievable_region,
    conditional_roc,
    intersect_regions,
    point_to_mixture,
    rule_rates,
)
from .joint import ConditionalScoreDistribution, JointBinaryDistribution, LossSpec, resolve_group

SCHEMA_VERSION = 1
TERNARY_TOL = 1e-9
TERNARY_MAX_ITER = 200
TIE_TOL = 1e-12
DEFAULT_TOL = 1e-6

REGIMES = ("max_profit", "group_blind", "demographic_parity", "equal_opportunity", "equalized_odds")


@dataclass(frozen=True)
class RandomizedThresholdPolicy:
    """One threshold rule per group, in the group order of the distribution."""

    groups: tuple
    rules: tuple

    def __post_init__(self):
        if len(self.groups) != len(self.rules):
            raise ValueError("need exactly one rule per group")
        object.__setattr__(self, "groups", tuple(self.groups))
        object.__setattr__(self, "rules", tuple(self.rules))

    def rule(self, a) -> ThresholdRule:
        return self.rules[resolve_group(self.groups, a)]

    def to_dict(self) -> dict:
        return {str(g): rule_to_dict(r) for g, r in zip(self.groups, self.rules)}

    @classmethod
    def from_dict(cls, data: dict, groups: Sequence | None = None) -> "RandomizedThresholdPolicy":
        names = list(groups) if groups is not None else list(data)
        return cls(tuple(names), tuple(rule_from_dict(data[str(g)]) for g in names))


def rule_to_dict(rule: ThresholdRule) -> dict:
    if isinstance(rule, Fixed):
        return {"type": "fixed", "threshold": _json_threshold(rule.threshold)}
    return {
        "type": "mixture",
        "low": _json_threshold(rule.low),
        "high": _json_threshold(rule.high),
        "p_low": rule.p_low,
        "p_floor": rule.p_floor,
    }


def _parse_threshold(v) -> float:
    if v == "+inf":
        return math.inf
    if v == "-inf":
        return -math.inf
    return float(v)


def rule_from_dict(d: dict) -> ThresholdRule:
    if d["type"] == "fixed":
        return Fixed(_parse_threshold(d["threshold"]))
    if d["type"] == "mixture":
        return Mixture(
            _parse_threshold(d["low"]),
            _parse_threshold(d["high"]),
            float(d["p_low"]),
            float(d.get("p_floor", 0.0)),
        )
    raise ValueError(f"unknown rule type {d['type']!r}")


@dataclass(frozen=True)
class PolicyReport:
    criterion: str
    policy: RandomizedThresholdPolicy
    rates: tuple
    acceptance: tuple
    expected_loss: float
    loss: LossSpec
    violation: float
    tolerance: float = DEFAULT_TOL
    notes: tuple = ()
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def satisfied(self) -> bool:
        return self.violation <= self.tolerance

    def to_dict(self) -> dict:
        groups = []
        for a, name in enumerate(self.policy.groups):
            groups.append(
                {
                    "group": str(name),
                    "rule": rule_to_dict(self.policy.rules[a]),
                    "fpr": float(self.rates[a][0]),
                    "tpr": float(self.rates[a][1]),
                    "acceptance": float(self.acceptance[a]),
                }
            )
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "policy_report",
            "criterion": self.criterion,
            "loss": {"cost_fp": self.loss.cost_fp, "cost_fn": self.loss.cost_fn},
            "groups": groups,
            "expected_loss": float(self.expected_loss),
            "violation": float(self.violation),
            "tolerance": float(self.tolerance),
            "satisfied": self.satisfied,
            "notes": list(self.notes),
            "diagnostics": self.diagnostics,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def policy_from_report_dict(data: dict) -> RandomizedThresholdPolicy:
    names = [g["group"] for g in data["groups"]]
    return RandomizedThresholdPolicy(tuple(names), tuple(rule_from_dict(g["rule"]) for g in data["groups"]))


# --------------------------------------------------------------------------
# Evaluation


def policy_rates(dist: ConditionalScoreDistribution, policy: RandomizedThresholdPolicy) -> list:
    return [rule_rates(dist, a, policy.rule(g)) for a, g in enumerate(dist.groups)]


def policy_loss(dist: ConditionalScoreDistribution, policy: RandomizedThresholdPolicy, loss: LossSpec) -> float:
    rates = np.asarray(policy_rates(dist, policy))
    return _rates_loss(dist, rates, loss)


def _rates_loss(dist, rates, loss) -> float:
    w = dist.cell_weights
    return float(np.sum(loss.cost_fp * w[:, 0] * rates[:, 0] + loss.cost_fn * w[:, 1] * (1.0 - rates[:, 1])))


def policy_joint(dist: ConditionalScoreDistribution, policy: RandomizedThresholdPolicy) -> JointBinaryDistribution:
    """Exact table of ``(A, Ytilde, Y)`` induced by applying ``policy`` to the score."""
    rates = np.asarray(policy_rates(dist, policy))  # (K, y) acceptance given y
    w = dist.cell_weights
    cells = np.stack([w * (1.0 - rates), w * rates], axis=1)
    return JointBinaryDistribution(dist.groups, cells / cells.sum())


def criterion_violation(criterion: str, rates: np.ndarray, acceptance: np.ndarray) -> float:
    if criterion == "equalized_odds":
        return float(max(np.ptp(rates[:, 0]), np.ptp(rates[:, 1])))
    if criterion == "equal_opportunity":
        return float(np.ptp(rates[:, 1]))
    if criterion == "demographic_parity":
        return float(np.ptp(acceptance))
    return 0.0


def _report(dist, loss, criterion, rules, notes=(), diagnostics=None, tolerance=DEFAULT_TOL) -> PolicyReport:
    policy = RandomizedThresholdPolicy(dist.groups, tuple(rules))
    rates = np.asarray(policy_rates(dist, policy))
    w = dist.cell_weights
    pi = w / w.sum(axis=1, keepdims=True)
    acceptance = pi[:, 0] * rates[:, 0] + pi[:, 1] * rates[:, 1]
    return PolicyReport(
        criterion=criterion,
        policy=policy,
        rates=tuple(tuple(map(float, r)) for r in rates),
        acceptance=tuple(map(float, acceptance)),
        expected_loss=_rates_loss(dist, rates, loss),
        loss=loss,
        violation=criterion_violation(criterion, rates, acceptance),
        tolerance=tolerance,
        notes=tuple(notes),
        diagnostics=diagnostics or {},
    )


# --------------------------------------------------------------------------
# One-dimensional search


def ternary_search(f: Callable[[float], float], lo: float, hi: float, *, tol=TERNARY_TOL, max_iter=TERNARY_MAX_ITER):
    """Bracket ``[lo, hi]`` around a minimiser of the convex function ``f``."""
    it = 0
    while hi - lo > tol and it < max_iter:
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        if f(m1) <= f(m2):
            hi = m2
        else:
            lo = m1
        it += 1
    return lo, hi, it


def _minimise_piecewise(f, breakpoints: np.ndarray, lo: float, hi: float):
    """Exact minimiser of a convex piecewise-linear ``f`` with known breakpoints.

    Ternary search narrows the bracket; the answer is the best breakpoint
    inside it together with the nearest breakpoints just outside (the
    bracket may have stopped between two breakpoints). Ties go to the
    smallest coordinate.
    """
    blo, bhi, iters = ternary_search(f, lo, hi)
    bp = np.unique(np.clip(breakpoints, lo, hi))
    i0 = max(int(np.searchsorted(bp, blo, side="left")) - 1, 0)
    i1 = min(int(np.searchsorted(bp, bhi, side="right")) + 1, len(bp))
    cands = bp[i0:i1]
    vals = np.array([f(c) for c in cands])
    best = vals.min()
    k = int(np.flatnonzero(vals <= best + TIE_TOL * max(1.0, abs(best)))[0])
    return float(cands[k]), {"ternary_iterations": iters, "bracket": [blo, bhi], "candidates": int(len(cands))}


def _curves(dist):
    rocs = [conditional_roc(dist, a) for a in range(dist.n_groups)]
    return rocs, [achievable_region(r) for r in rocs]


def _realise(rocs, regions, targets):
    return [point_to_mixture(roc, t, region=reg) for roc, reg, t in zip(rocs, regions, targets)]


# --------------------------------------------------------------------------
# Regimes


def optimize_max_profit(dist: ConditionalScoreDistribution, loss: LossSpec) -> PolicyReport:
    """Each group independently takes its loss-minimising threshold."""
    rocs, _ = _curves(dist)
    w = dist.cell_weights
    rules = []
    for a, roc in enumerate(rocs):
        cost = loss.cost_fp * w[a, 0] * roc.fpr + loss.cost_fn * w[a, 1] * (1.0 - roc.tpr)
        k = int(np.flatnonzero(cost <= cost.min() + TIE_TOL)[0])  # highest threshold among ties
        rules.append(Fixed(float(roc.thresholds[k])))
    return _report(dist, loss, "max_profit", rules)


def optimize_group_blind(dist: ConditionalScoreDistribution, loss: LossSpec) -> PolicyReport:
    """One threshold shared by every group."""
    thresholds = np.concatenate([[np.inf], dist.support[::-1], [-np.inf]])
    w = dist.cell_weights
    cost = np.zeros(len(thresholds))
    for a in range(dist.n_groups):
        cost += loss.cost_fp * w[a, 0] * dist.survival(a, 0, thresholds)
        cost += loss.cost_fn * w[a, 1] * (1.0 - dist.survival(a, 1, thresholds))
    k = int(np.flatnonzero(cost <= cost.min() + TIE_TOL)[0])
    t = float(thresholds[k])
    return _report(dist, loss, "group_blind", [Fixed(t)] * dist.n_groups)


def optimize_equalized_odds(dist: ConditionalScoreDistribution, loss: LossSpec) -> PolicyReport:
    """Common rate point minimising the loss over the intersection of regions."""
    rocs, regions = _curves(dist)
    inter = intersect_regions(regions)
    w = dist.cell_weights
    neg, pos = w[:, 0].sum(), w[:, 1].sum()

    def f(x):
        return loss.cost_fp * neg * x + loss.cost_fn * pos * (1.0 - float(inter.boundary(x)))

    x, diag = _minimise_piecewise(f, inter.xs, 0.0, 1.0)
    target = (x, float(inter.boundary(x)))
    rules = _realise(rocs, regions, [target] * dist.n_groups)
    diag["target"] = list(target)
    return _report(dist, loss, "equalized_odds", rules, _mixture_notes(dist, rules), diag)


def optimize_equal_opportunity(dist: ConditionalScoreDistribution, loss: LossSpec) -> PolicyReport:
    """Common true positive rate; each group takes its cheapest fpr for it."""
    rocs, regions = _curves(dist)
    w = dist.cell_weights

    def f(nu):
        return sum(
            loss.cost_fp * w[a, 0] * float(r.min_fpr(nu)) + loss.cost_fn * w[a, 1] * (1.0 - nu)
            for a, r in enumerate(regions)
        )

    bps = np.concatenate([[0.0, 1.0], *[r.ys for r in regions]])
    nu, diag = _minimise_piecewise(f, bps, 0.0, 1.0)
    targets = [(float(r.min_fpr(nu)), nu) for r in regions]
    rules = _realise(rocs, regions, targets)
    diag["tpr"] = nu
    notes = _mixture_notes(dist, rules)
    if any(isinstance(r, Mixture) for r in rules):
        notes.append("common true positive rate falls between curve points; randomisation used at a score atom")
    return _report(dist, loss, "equal_opportunity", rules, notes, diag)


def _acceptance_chain(region: FeasibleRegion, pi0: float, pi1: float):
    """Upper boundary from (0, 0) to (1, 1) and its acceptance rate at each vertex."""
    xs, ys = region.xs, region.ys
    if ys[0] > 0:
        xs, ys = np.concatenate([[0.0], xs]), np.concatenate([[0.0], ys])
    rho = pi0 * xs + pi1 * ys
    return xs, ys, rho


def optimize_demographic_parity(dist: ConditionalScoreDistribution, loss: LossSpec) -> PolicyReport:
    """Common acceptance rate; each group takes its cheapest point at that rate."""
    rocs, regions = _curves(dist)
    w = dist.cell_weights
    pi = w / w.sum(axis=1, keepdims=True)
    chains = [_acceptance_chain(r, pi[a, 0], pi[a, 1]) for a, r in enumerate(regions)]

    def point(a, rho):
        xs, ys, rr = chains[a]
        return float(np.interp(rho, rr, xs)), float(np.interp(rho, rr, ys))

    def f(rho):
        total = 0.0
        for a in range(dist.n_groups):
            x, y = point(a, rho)
            total += loss.cost_fp * w[a, 0] * x + loss.cost_fn * w[a, 1] * (1.0 - y)
        return total

    bps = np.concatenate([[0.0, 1.0], *[c[2] for c in chains]])
    rho, diag = _minimise_piecewise(f, bps, 0.0, 1.0)
    targets = [point(a, rho) for a in range(dist.n_groups)]
    rules = _realise(rocs, regions, targets)
    diag["acceptance"] = rho
    return _report(dist, loss, "demographic_parity", rules, _mixture_notes(dist, rules), diag)


def _mixture_notes(dist, rules) -> list:
    return [f"group {dist.groups[a]}: randomised two-threshold rule" for a, r in enumerate(rules) if isinstance(r, Mixture)]


OPTIMIZERS = {
    "max_profit": optimize_max_profit,
    "group_blind": optimize_group_blind,
    "demographic_parity": optimize_demographic_parity,
    "equal_opportunity": optimize_equal_opportunity,
    "equalized_odds": optimize_equalized_odds,
}


def optimize(dist: ConditionalScoreDistribution, loss: LossSpec, criterion: str) -> PolicyReport:
    try:
        fn = OPTIMIZERS[criterion]
    except KeyError:
        raise ValueError(f"unknown regime {criterion!r}; expected one of {REGIMES}") from None
    return fn(dist, loss)


def apply_policy(policy: RandomizedThresholdPolicy, r, a, rng: np.random.Generator):
    """Decide for score(s) ``r`` in group(s) ``a``; scalars give an int."""
    r_arr = np.asarray(r, dtype=float)
    if np.ndim(a) == 0:
        prob = policy.rule(a.item() if isinstance(a, np.ndarray) else a).acceptance(r_arr)
    else:
        a_list = np.asarray(a).tolist()
        idx = np.asarray([resolve_group(policy.groups, g) for g in a_list])
        prob = np.empty(r_arr.shape, dtype=float)
        for k, rule in enumerate(policy.rules):
            sel = idx == k
            prob[sel] = rule.acceptance(r_arr[sel])
    out = (rng.random(np.shape(prob)) < prob).astype(int)
    return int(out) if out.ndim == 0 else out


def feasible_in_all(regions: Sequence[FeasibleRegion], point, slack=FEASIBILITY_SLACK) -> bool:
    return all(r.contains(point, slack) for r in regions)
