"""Geometry in the (false positive rate, true positive rate) plane.

Objects built here:

* the polytope of rates reachable by randomising a binary predictor,
* the per-group ROC curve of a score under the ``R > t`` convention,
* the region reachable by randomised thresholding (upper concave hull of
  the curve, never below the diagonal),
* intersections of such regions, and
* the decomposition of a reachable rate point into a threshold rule.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import Infeasible
from .joint import ConditionalScoreDistribution, JointBinaryDistribution, RatePoint, gamma

FEASIBILITY_SLACK = 1e-9
CONVEXITY_TOL = 1e-12
# a target this close to a curve point or chord is treated as lying on it
SNAP_TOL = 1e-10


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def upper_hull_indices(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Indices of the strictly concave upper hull, ordered by increasing x.

    Among points sharing an x coordinate only the highest is considered;
    collinear interior points are dropped.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    order = np.lexsort((-ys, xs))
    # first of each x-run is the highest point at that x
    first = np.ones(order.size, dtype=bool)
    first[1:] = xs[order][1:] != xs[order][:-1]
    cand = order[first]
    px, py = xs[cand].tolist(), ys[cand].tolist()
    stack: list[int] = []
    for k in range(len(cand)):
        while len(stack) >= 2:
            o, a = stack[-2], stack[-1]
            cross = (px[a] - px[o]) * (py[k] - py[o]) - (py[a] - py[o]) * (px[k] - px[o])
            if cross >= 0:
                stack.pop()
            else:
                break
        stack.append(k)
    return cand[np.asarray(stack, dtype=np.int64)]


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Counter-clockwise convex hull (Andrew's monotone chain), collinear points removed."""
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    if len(pts) <= 2:
        return pts
    pts = pts[np.lexsort((pts[:, 1], pts[:, 0]))]
    lower: list = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(tuple(p))
    upper: list = []
    for p in pts[::-1]:
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(tuple(p))
    hull = lower[:-1] + upper[:-1]
    return np.asarray(hull, dtype=float)


def _segment_distance(p, a, b) -> float:
    p, a, b = (np.asarray(v, dtype=float) for v in (p, a, b))
    ab = b - a
    denom = float(ab @ ab)
    u = 0.0 if denom == 0 else float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
    return float(np.hypot(*(a + u * ab - p)))


# --------------------------------------------------------------------------
# Binary predictor polytopes


@dataclass(frozen=True)
class ConvexPolygon:
    """Convex polygon with counter-clockwise vertices (a segment if only two)."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 2)
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @classmethod
    def hull_of(cls, points) -> "ConvexPolygon":
        return cls(convex_hull(np.asarray(points, dtype=float)))

    def edges(self) -> list[tuple[np.ndarray, np.ndarray]]:
        v = self.vertices
        if len(v) == 1:
            return []
        if len(v) == 2:
            return [(v[0], v[1])]
        return [(v[i], v[(i + 1) % len(v)]) for i in range(len(v))]

    def contains(self, point, tol: float = FEASIBILITY_SLACK) -> bool:
        p = np.asarray(point, dtype=float)
        v = self.vertices
        if len(v) == 1:
            return bool(np.hypot(*(p - v[0])) <= tol)
        if len(v) == 2:
            return _segment_distance(p, v[0], v[1]) <= tol
        for a, b in self.edges():
            length = float(np.hypot(*(b - a)))
            if _cross(a, b, p) < -tol * length:
                return False
        return True

    @property
    def area(self) -> float:
        v = self.vertices
        if len(v) < 3:
            return 0.0
        x, y = v[:, 0], v[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def binary_polytope(joint: JointBinaryDistribution, a) -> ConvexPolygon:
    """Rates reachable within group ``a`` by randomising ``Yhat``."""
    g = gamma(joint, a)
    pts = [(0.0, 0.0), (g.fpr, g.tpr), (1.0 - g.fpr, 1.0 - g.tpr), (1.0, 1.0)]
    return ConvexPolygon.hull_of(pts)


# --------------------------------------------------------------------------
# ROC curves and achievable regions


@dataclass(frozen=True)
class RocCurve:
    """Rates of ``I{R > t}`` for a decreasing sequence of thresholds.

    The first point is ``(0, 0)`` at ``t = +inf``, the last ``(1, 1)`` at
    ``t = -inf``; both coordinates are nondecreasing along the list.
    """

    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray

    def __post_init__(self):
        for name in ("thresholds", "fpr", "tpr"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        t = self.thresholds
        if not (t[0] == np.inf and t[-1] == -np.inf):
            raise ValueError("curve must start at t=+inf and end at t=-inf")
        if np.any(np.diff(t) >= 0):
            raise ValueError("thresholds must be strictly decreasing")
        if np.any(np.diff(self.fpr) < -CONVEXITY_TOL) or np.any(np.diff(self.tpr) < -CONVEXITY_TOL):
            raise ValueError("rates must be nondecreasing along the curve")

    @property
    def points(self) -> np.ndarray:
        return np.column_stack([self.fpr, self.tpr])

    def __len__(self):
        return len(self.thresholds)

    def to_records(self) -> list[list]:
        return [[_json_threshold(t), float(x), float(y)] for t, x, y in zip(self.thresholds, self.fpr, self.tpr)]

    def to_json(self) -> str:
        return json.dumps(self.to_records())


def _json_threshold(t: float):
    if t == math.inf:
        return "+inf"
    if t == -math.inf:
        return "-inf"
    return float(t)


def conditional_roc(dist: ConditionalScoreDistribution, a) -> RocCurve:
    """ROC curve of group ``a``: one point per distinct score in the group."""
    i = dist.index(a)
    keep = (dist.masses[i, 0] + dist.masses[i, 1]) > 0
    s = dist.support[keep]
    # thresholds below the top support point, in decreasing order
    thresholds = np.concatenate([[np.inf], s[-2::-1], [-np.inf]])
    fpr = dist.survival(i, 0, thresholds)
    tpr = dist.survival(i, 1, thresholds)
    return RocCurve(thresholds, np.maximum.accumulate(fpr), np.maximum.accumulate(tpr))


@dataclass(frozen=True)
class FeasibleRegion:
    """Region between the diagonal and a concave upper boundary.

    ``xs, ys`` are the boundary vertices from ``x = 0`` to ``(1, 1)``. The
    first vertex sits above the origin when some true positive rate is
    reachable without false positives; the segment down to ``(0, 0)`` is
    then part of the region's edge.
    ``thresholds`` names the curve threshold behind each vertex when the
    region comes from a single ROC curve, and is ``None`` otherwise.
    """

    xs: np.ndarray
    ys: np.ndarray
    thresholds: np.ndarray | None = None

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        ys = np.asarray(self.ys, dtype=float)
        if xs.shape != ys.shape or xs.size < 2:
            raise ValueError("boundary needs at least two vertices")
        if xs[0] != 0 or xs[-1] != 1 or ys[-1] != 1 or not 0 <= ys[0] <= 1:
            raise ValueError("boundary must span x in [0, 1] and end at (1, 1)")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("boundary x coordinates must be strictly increasing")
        for arr in (xs, ys):
            arr.setflags(write=False)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        if self.thresholds is not None:
            t = np.asarray(self.thresholds, dtype=float)
            t.setflags(write=False)
            object.__setattr__(self, "thresholds", t)

    @property
    def vertices(self) -> np.ndarray:
        return np.column_stack([self.xs, self.ys])

    def boundary(self, x):
        """Largest reachable true positive rate at false positive rate ``x``."""
        return np.interp(x, self.xs, self.ys)

    def min_fpr(self, tpr):
        """Smallest reachable false positive rate at true positive rate ``tpr``."""
        top = int(np.argmax(self.ys >= self.ys[-1]))
        return np.interp(tpr, self.ys[: top + 1], self.xs[: top + 1])

    def contains(self, point, slack: float = FEASIBILITY_SLACK) -> bool:
        x, y = float(point[0]), float(point[1])
        if x < -slack or x > 1 + slack:
            return False
        xc = min(max(x, 0.0), 1.0)
        return (y >= xc - slack) and (y <= float(self.boundary(xc)) + slack)

    @property
    def area(self) -> float:
        """Area between the boundary and the diagonal."""
        return float(np.sum(np.diff(self.xs) * (self.ys[1:] + self.ys[:-1]) / 2) - 0.5)

    def is_diagonal(self, tol: float = CONVEXITY_TOL) -> bool:
        return bool(np.all(np.abs(self.ys - self.xs) <= tol))

    def to_records(self) -> list[list]:
        t = self.thresholds if self.thresholds is not None else [None] * len(self.xs)
        return [
            [None if th is None else _json_threshold(th), float(x), float(y)]
            for th, x, y in zip(t, self.xs, self.ys)
        ]


def achievable_region(roc: RocCurve) -> FeasibleRegion:
    """Upper concave hull of the curve points together with ``(0,0)`` and ``(1,1)``."""
    idx = upper_hull_indices(roc.fpr, roc.tpr)
    return FeasibleRegion(roc.fpr[idx], roc.tpr[idx], roc.thresholds[idx])


def intersect_regions(regions: Sequence[FeasibleRegion]) -> FeasibleRegion:
    """Intersection of regions: the pointwise minimum of their boundaries."""
    regions = list(regions)
    if not regions:
        raise ValueError("need at least one region")
    if len(regions) == 1:
        r = regions[0]
        return FeasibleRegion(r.xs, r.ys)
    xs = np.unique(np.concatenate([r.xs for r in regions]))
    vals = np.vstack([r.boundary(xs) for r in regions])
    extra = []
    x0, x1 = xs[:-1], xs[1:]
    for i in range(len(regions)):
        for j in range(i + 1, len(regions)):
            d = vals[i] - vals[j]
            d0, d1 = d[:-1], d[1:]
            cross = (d0 * d1) < 0
            if np.any(cross):
                frac = d0[cross] / (d0[cross] - d1[cross])
                extra.append(x0[cross] + frac * (x1[cross] - x0[cross]))
    if extra:
        xs = np.unique(np.concatenate([xs, *extra]))
    ys = np.min(np.vstack([r.boundary(xs) for r in regions]), axis=0)
    idx = upper_hull_indices(xs, ys)
    return FeasibleRegion(xs[idx], ys[idx])


# --------------------------------------------------------------------------
# Threshold rules realising a rate point


@dataclass(frozen=True)
class Fixed:
    """Accept exactly when ``R > threshold``."""

    threshold: float

    def acceptance(self, r):
        return (np.asarray(r, dtype=float) > self.threshold).astype(float)

    def average_threshold_cdf(self, cdf) -> float:
        return float(cdf(self.threshold))


@dataclass(frozen=True)
class Mixture:
    """Two-threshold randomised rule.

    Accept when ``R > high``; when ``low < R <= high`` accept with
    probability ``p_low``; when ``R <= low`` accept with probability
    ``p_floor`` (zero for the plain two-threshold rule).
    """

    low: float
    high: float
    p_low: float
    p_floor: float = 0.0

    def __post_init__(self):
        if not self.low < self.high:
            raise ValueError("mixture needs low < high")
        if not 0.0 <= self.p_floor <= self.p_low <= 1.0:
            raise ValueError("need 0 <= p_floor <= p_low <= 1")

    def acceptance(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r > self.high, 1.0, np.where(r > self.low, self.p_low, self.p_floor))

    def average_threshold_cdf(self, cdf) -> float:
        """Expected value of ``cdf(T)`` for the equivalent random threshold ``T``."""
        return float(
            (1.0 - self.p_low) * cdf(self.high) + (self.p_low - self.p_floor) * cdf(self.low)
        )


ThresholdRule = Union[Fixed, Mixture]


def rule_rates(dist: ConditionalScoreDistribution, a, rule: ThresholdRule) -> RatePoint:
    """Exact (fpr, tpr) of a threshold rule within group ``a``."""
    i = dist.index(a)
    if isinstance(rule, Fixed):
        return RatePoint(float(dist.survival(i, 0, rule.threshold)), float(dist.survival(i, 1, rule.threshold)))
    rates = []
    for y in (0, 1):
        hi = float(dist.survival(i, y, rule.high))
        lo = float(dist.survival(i, y, rule.low))
        rates.append((1.0 - rule.p_low) * hi + (rule.p_low - rule.p_floor) * lo + rule.p_floor)
    return RatePoint(*rates)


def _chord_rule(t_hi: float, t_lo: float, w: float, floor: float = 0.0) -> ThresholdRule:
    """Rule with rates ``floor*(1,1) + (1-floor)*((1-w) C(t_hi) + w C(t_lo))``."""
    if floor <= SNAP_TOL:
        if w <= SNAP_TOL:
            return Fixed(t_hi)
        if w >= 1 - SNAP_TOL:
            return Fixed(t_lo)
        return Mixture(low=t_lo, high=t_hi, p_low=float(w))
    p_low = 1.0 - (1.0 - floor) * (1.0 - w)
    return Mixture(low=t_lo, high=t_hi, p_low=float(p_low), p_floor=float(floor))


def _gap_key(t_hi: np.ndarray, t_lo: np.ndarray, i: np.ndarray, j: np.ndarray):
    with np.errstate(invalid="ignore"):
        gap = t_hi - t_lo
    gap = np.where(np.isfinite(gap), gap, np.inf)
    return np.lexsort((j - i, gap))


def point_to_mixture(
    roc: RocCurve,
    target,
    *,
    region: FeasibleRegion | None = None,
    slack: float = FEASIBILITY_SLACK,
) -> ThresholdRule:
    """Threshold rule of the group whose ROC curve is ``roc`` that hits ``target``.

    Preference order: a single curve point; a chord between two curve
    points (adjacent curve points or adjacent hull vertices), choosing the
    smallest threshold gap; otherwise the point is interior and the rule
    mixes the hull chord hit by the ray from ``(1, 1)`` through the target
    with constant acceptance, taking the nearest hit to keep ``p_floor``
    minimal.
    """
    if region is None:
        region = achievable_region(roc)
    if not region.contains(target, slack):
        raise Infeasible(target)
    x = min(max(float(target[0]), 0.0), 1.0)
    y = min(max(float(target[1]), x), float(region.boundary(x)))
    q = np.array([x, y])
    pts = roc.points
    thr = roc.thresholds
    n = len(pts)

    d = np.hypot(pts[:, 0] - x, pts[:, 1] - y)
    k = int(np.argmin(d))
    if d[k] <= SNAP_TOL:
        return Fixed(float(thr[k]))

    index_of = {t: i for i, t in enumerate(thr.tolist())}
    hull_idx = np.asarray([index_of[t] for t in region.thresholds.tolist()]) if region.thresholds is not None else None
    seg_i = [np.arange(n - 1), np.array([0])]
    seg_j = [np.arange(1, n), np.array([n - 1])]
    if hull_idx is not None and len(hull_idx) > 1:
        seg_i.append(hull_idx[:-1])
        seg_j.append(hull_idx[1:])
    si, sj = np.concatenate(seg_i), np.concatenate(seg_j)
    a, b = pts[si], pts[sj]
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    with np.errstate(invalid="ignore", divide="ignore"):
        u = np.where(denom > 0, np.einsum("ij,ij->i", q - a, ab) / denom, 0.0)
    u = np.clip(u, 0.0, 1.0)
    dist_seg = np.hypot(*(a + u[:, None] * ab - q).T)
    on = np.flatnonzero(dist_seg <= SNAP_TOL)
    if on.size:
        order = _gap_key(thr[si[on]], thr[sj[on]], si[on], sj[on])
        best = on[order[0]]
        return _chord_rule(float(thr[si[best]]), float(thr[sj[best]]), float(u[best]))

    # interior target: ray q + s (q - e) from e = (1, 1)
    dvec = q - 1.0
    rhs = a - q
    det = -dvec[0] * ab[:, 1] + dvec[1] * ab[:, 0]
    with np.errstate(invalid="ignore", divide="ignore"):
        s = (rhs[:, 0] * -ab[:, 1] + rhs[:, 1] * ab[:, 0]) / det
        uu = (dvec[0] * rhs[:, 1] - dvec[1] * rhs[:, 0]) / det
    ok = (np.abs(det) > 0) & (s >= -SNAP_TOL) & (uu >= -SNAP_TOL) & (uu <= 1 + SNAP_TOL)
    if not np.any(ok):
        raise Infeasible(target, "no chord found for target inside the region")
    cand = np.flatnonzero(ok)
    best = cand[np.argmin(s[cand])]
    s_best = max(float(s[best]), 0.0)
    floor = s_best / (1.0 + s_best)
    w = float(np.clip(uu[best], 0.0, 1.0))
    return _chord_rule(float(thr[si[best]]), float(thr[sj[best]]), w, floor)
