"""Oblivious fairness checks.

Each check looks only at the joint law of group, outcome and prediction
(or score). Checks return magnitudes; pass/fail is the magnitude compared
against a tolerance chosen by the caller.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import StructureMismatch
from .geometry import RocCurve, _json_threshold, conditional_roc
from .joint import ConditionalScoreDistribution, JointBinaryDistribution, gamma

SCHEMA_VERSION = 1
DENSIFY_SPACING = 0.002
DEFAULT_BINS = 20

CRITERIA = (
    "equalized_odds",
    "equal_opportunity",
    "demographic_parity",
    "identical_roc",
    "matching_roc",
    "matching_frequencies",
)
SCORE_ONLY = ("identical_roc", "matching_roc")
DEFAULT_TOLERANCES = {
    "equalized_odds": 0.02,
    "equal_opportunity": 0.02,
    "demographic_parity": 0.02,
    "identical_roc": 0.04,
    "matching_roc": 0.03,
    "matching_frequencies": 0.05,
}
DISCLAIMER = "These checks measure specific violations on the supplied data; passing them does not certify that a predictor is fair."


def as_score_distribution(joint: JointBinaryDistribution) -> ConditionalScoreDistribution:
    """View a binary predictor as a score taking the values 0 and 1."""
    masses = np.transpose(joint.cells, (0, 2, 1))  # [a, y, yhat]
    return ConditionalScoreDistribution.from_joint_masses(joint.groups, [0.0, 1.0], masses)


def _cdf_table(dist: ConditionalScoreDistribution) -> np.ndarray:
    """``Pr{R <= s_i | A=a, Y=y}`` on the shared support, shape (K, 2, S)."""
    return np.cumsum(dist.masses, axis=2)


def _binary_rates(joint: JointBinaryDistribution) -> np.ndarray:
    joint.require_conditionals()
    return np.asarray([gamma(joint, a) for a in range(joint.n_groups)])


def equalized_odds_violation(obj) -> float:
    """Largest cross-group gap in the predictor's law given the outcome."""
    if isinstance(obj, JointBinaryDistribution):
        r = _binary_rates(obj)
        return float(max(np.ptp(r[:, 0]), np.ptp(r[:, 1])))
    return float(np.max(np.ptp(_cdf_table(obj), axis=0)))


def equal_opportunity_violation(obj) -> float:
    """As :func:`equalized_odds_violation`, restricted to ``Y = 1``."""
    if isinstance(obj, JointBinaryDistribution):
        return float(np.ptp(_binary_rates(obj)[:, 1]))
    return float(np.max(np.ptp(_cdf_table(obj)[:, 1], axis=0)))


def demographic_parity_violation(obj) -> float:
    """Largest cross-group gap in acceptance rate (binary) or score CDF."""
    if isinstance(obj, JointBinaryDistribution):
        cw = obj.cell_weights
        accept = obj.cells[:, 1, :].sum(axis=1) / cw.sum(axis=1)
        return float(np.ptp(accept))
    cdfs = np.vstack([np.cumsum(obj.group_masses(a)) for a in range(obj.n_groups)])
    return float(np.max(np.ptp(cdfs, axis=0)))


def conditional_kolmogorov_distance(r1, r2) -> float:
    """Max over (group, outcome) of the sup-norm gap between conditional CDFs."""
    if isinstance(r1, JointBinaryDistribution):
        r1 = as_score_distribution(r1)
    if isinstance(r2, JointBinaryDistribution):
        r2 = as_score_distribution(r2)
    if set(r1.groups) != set(r2.groups) or len(r1.groups) != len(r2.groups):
        raise StructureMismatch(f"group sets differ: {r1.groups} vs {r2.groups}")
    grid = np.union1d(r1.support, r2.support)
    worst = 0.0
    for g in r1.groups:
        for y in (0, 1):
            gap = np.abs(r1.cdf(g, y, grid) - r2.cdf(g, y, grid))
            worst = max(worst, float(gap.max()))
    return worst


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    tolerance: float
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.value <= self.tolerance

    def to_dict(self) -> dict:
        return {
            "value": float(self.value),
            "tolerance": float(self.tolerance),
            "passed": self.passed,
            "detail": self.detail,
        }


def identical_roc_check(dist: ConditionalScoreDistribution, tol: float) -> CheckResult:
    """Largest distance between two groups' curve points at the same threshold."""
    thresholds = np.concatenate([[np.inf], dist.support[::-1], [-np.inf]])
    pts = np.stack(
        [np.column_stack([dist.survival(a, 0, thresholds), dist.survival(a, 1, thresholds)]) for a in range(dist.n_groups)]
    )
    worst, detail = 0.0, {}
    for i, j in itertools.combinations(range(dist.n_groups), 2):
        d = np.hypot(*(pts[i] - pts[j]).T)
        k = int(np.argmax(d))
        if d[k] > worst or not detail:
            worst = float(d[k])
            detail = {"groups": [str(dist.groups[i]), str(dist.groups[j])], "threshold": _json_threshold(float(thresholds[k]))}
    return CheckResult("identical_roc", worst, tol, detail)


def _densify(points: np.ndarray, spacing: float):
    """Points along the polyline no further apart than ``spacing``, with segment ids."""
    seg = np.diff(points, axis=0)
    length = np.hypot(seg[:, 0], seg[:, 1])
    n = np.maximum(np.ceil(length / spacing).astype(int), 1)
    ids = np.repeat(np.arange(len(seg)), n)
    starts = np.concatenate([[0], np.cumsum(n)[:-1]])
    frac = (np.arange(n.sum()) - np.repeat(starts, n)) / np.repeat(n, n)
    dense = points[ids] + frac[:, None] * seg[ids]
    dense = np.vstack([dense, points[-1:]])
    ids = np.concatenate([ids, [len(seg) - 1]])
    return dense, ids


def _directed_distance(src: np.ndarray, dst: np.ndarray, spacing: float, k: int = 8) -> tuple[float, np.ndarray]:
    """Largest distance from points of polyline ``src`` to polyline ``dst``.

    ``src`` is sampled at ``spacing``. For each sample the segments of
    ``dst`` owning its ``k`` nearest points in a dense sampling of ``dst``
    are measured exactly; the result is within ``spacing / 2`` of the
    true polyline distance.
    """
    q, _ = _densify(src, spacing)
    if len(dst) == 1:
        d = np.hypot(*(q - dst[0]).T)
        i = int(np.argmax(d))
        return float(d[i]), q[i]
    dense, seg_id = _densify(dst, spacing)
    k = min(k, len(dense))
    _, nn = cKDTree(dense).query(q, k=k)
    segs = seg_id[np.asarray(nn).reshape(len(q), k)]  # (m, k)
    a, b = dst[:-1][segs], dst[1:][segs]
    ab = b - a
    ap = q[:, None, :] - a
    denom = np.einsum("mkj,mkj->mk", ab, ab)
    with np.errstate(invalid="ignore", divide="ignore"):
        u = np.where(denom > 0, np.einsum("mkj,mkj->mk", ap, ab) / denom, 0.0)
    u = np.clip(u, 0.0, 1.0)
    foot = a + u[..., None] * ab
    best = np.min(np.hypot(foot[..., 0] - q[:, None, 0], foot[..., 1] - q[:, None, 1]), axis=1)
    i = int(np.argmax(best))
    return float(best[i]), q[i]


def _dedupe(points: np.ndarray) -> np.ndarray:
    keep = np.concatenate([[True], np.any(np.diff(points, axis=0) != 0, axis=1)])
    return points[keep]


def roc_image_distance(c1: RocCurve, c2: RocCurve, spacing: float = DENSIFY_SPACING) -> tuple[float, list]:
    """Symmetric Hausdorff distance between two ROC curves drawn as polylines."""
    p1, p2 = _dedupe(c1.points), _dedupe(c2.points)
    d12, at12 = _directed_distance(p1, p2, spacing)
    d21, at21 = _directed_distance(p2, p1, spacing)
    return (d12, at12.tolist()) if d12 >= d21 else (d21, at21.tolist())


def matching_roc_check(dist: ConditionalScoreDistribution, tol: float, spacing: float = DENSIFY_SPACING) -> CheckResult:
    """Whether all groups' ROC curves trace the same image."""
    curves = [conditional_roc(dist, a) for a in range(dist.n_groups)]
    worst, detail = 0.0, {"spacing": spacing}
    for i, j in itertools.combinations(range(dist.n_groups), 2):
        d, at = roc_image_distance(curves[i], curves[j], spacing)
        if d >= worst:
            worst = d
            detail = {"groups": [str(dist.groups[i]), str(dist.groups[j])], "worst_point": at, "spacing": spacing}
    return CheckResult("matching_roc", worst, tol, detail)


def equal_mass_edges(dist: ConditionalScoreDistribution, n_bins: int = DEFAULT_BINS) -> np.ndarray:
    """Bin edges splitting the pooled score into about equal-mass bins.

    Bins are ``(e_k, e_{k+1}]``; the outer edges are infinite. Atoms
    heavier than a bin merge neighbouring bins, so fewer may result.
    """
    if n_bins < 1:
        raise ValueError("need at least one bin")
    cum = np.cumsum(dist.pooled_masses())
    levels = np.arange(1, n_bins) / n_bins
    idx = np.searchsorted(cum, levels - 1e-12, side="left")
    inner = np.unique(dist.support[np.minimum(idx, len(cum) - 1)])
    inner = inner[inner < dist.support[-1]]
    return np.concatenate([[-np.inf], inner, [np.inf]])


def matching_frequencies_violation(obj, binning=None) -> tuple[float, dict]:
    """Largest cross-group gap in ``Pr{Y=1 | bin, A}``.

    ``binning`` is a number of equal-mass bins or explicit edges. A binary
    predictor uses its two values as bins, which compares precision (and
    negative predictive value) across groups. Cells without mass are
    skipped and listed in the detail.
    """
    if isinstance(obj, JointBinaryDistribution):
        pos = obj.cells[:, :, 1]
        tot = obj.cells.sum(axis=2)  # [a, yhat]
        labels = ["yhat=0", "yhat=1"]
    else:
        edges = equal_mass_edges(obj, binning or DEFAULT_BINS) if binning is None or np.ndim(binning) == 0 else np.asarray(binning, float)
        b = np.searchsorted(edges, obj.support, side="left") - 1
        b = np.clip(b, 0, len(edges) - 2)
        nb = len(edges) - 1
        joint = obj.masses * obj.cell_weights[:, :, None]  # [a, y, i]
        binned = np.zeros((obj.n_groups, 2, nb))
        for y in (0, 1):
            for a in range(obj.n_groups):
                binned[a, y] = np.bincount(b, weights=joint[a, y], minlength=nb)
        pos = binned[:, 1]
        tot = binned.sum(axis=1)
        labels = [f"({_json_threshold(float(edges[k]))}, {_json_threshold(float(edges[k + 1]))}]" for k in range(nb)]
    groups = obj.groups
    empty = [[str(groups[a]), labels[k]] for a in range(len(groups)) for k in range(len(labels)) if tot[a, k] <= 0]
    with np.errstate(invalid="ignore", divide="ignore"):
        freq = np.where(tot > 0, pos / tot, np.nan)
    worst, where = 0.0, None
    for k in range(len(labels)):
        f = freq[:, k]
        f = f[np.isfinite(f)]
        if f.size >= 2 and np.ptp(f) > worst:
            worst, where = float(np.ptp(f)), labels[k]
    detail = {"bins": len(labels), "worst_bin": where, "excluded_cells": empty}
    return worst, detail


@dataclass(frozen=True)
class AuditReport:
    checks: dict
    notes: tuple = ()
    counts: dict | None = None  # samples per group and outcome, when the input came from data

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "audit_report",
            "checks": {name: c.to_dict() for name, c in self.checks.items()},
            "all_passed": self.passed,
            "notes": list(self.notes),
            "counts": self.counts,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def sample_counts(obj) -> dict | None:
    """Unweighted samples behind each (group, outcome) cell, if known."""
    counts = getattr(obj, "counts", None)
    if counts is None:
        return None
    counts = np.asarray(counts)
    if counts.ndim == 3:  # binary joint: [a, yhat, y]
        counts = counts.sum(axis=1)
    return {str(g): {"y=0": int(counts[a, 0]), "y=1": int(counts[a, 1])} for a, g in enumerate(obj.groups)}


def audit(obj, criteria: Sequence[str] | None = None, tolerances=None, *, binning=None) -> AuditReport:
    """Run the requested checks; ``tolerances`` is a float or a per-check dict."""
    criteria = list(CRITERIA if criteria is None else criteria)
    unknown = [c for c in criteria if c not in CRITERIA]
    if unknown:
        raise ValueError(f"unknown criteria {unknown}; expected some of {CRITERIA}")
    if tolerances is None or isinstance(tolerances, dict):
        tol = {**DEFAULT_TOLERANCES, **(tolerances or {})}
    else:
        tol = {c: float(tolerances) for c in CRITERIA}
    binary = isinstance(obj, JointBinaryDistribution)
    checks, notes = {}, [DISCLAIMER] if criteria else []
    for c in criteria:
        if binary and c in SCORE_ONLY:
            notes.append(f"{c}: skipped, needs a score rather than a binary predictor")
            continue
        if c == "equalized_odds":
            checks[c] = CheckResult(c, equalized_odds_violation(obj), tol[c])
        elif c == "equal_opportunity":
            checks[c] = CheckResult(c, equal_opportunity_violation(obj), tol[c])
        elif c == "demographic_parity":
            checks[c] = CheckResult(c, demographic_parity_violation(obj), tol[c])
        elif c == "identical_roc":
            checks[c] = identical_roc_check(obj, tol[c])
        elif c == "matching_roc":
            checks[c] = matching_roc_check(obj, tol[c])
        elif c == "matching_frequencies":
            value, detail = matching_frequencies_violation(obj, binning)
            checks[c] = CheckResult(c, value, tol[c], detail)
            if detail["excluded_cells"]:
                notes.append(f"matching_frequencies: {len(detail['excluded_cells'])} empty (group, bin) cells excluded")
            if binary:
                notes.append("matching_frequencies on a binary predictor compares Pr{Y=1 | prediction, group}; thresholding a score with matching frequencies need not preserve it")
    return AuditReport(checks, tuple(notes), sample_counts(obj))
