"""Loss-optimal derived predictors from a binary predictor and the group.

A derived predictor flips ``Yhat`` with group-dependent probabilities:
``p[yhat, a] = Pr{Ytilde=1 | Yhat=yhat, A=a}``. Its rates within group
``a`` are ``p[1,a] * gamma_a(Yhat) + p[0,a] * gamma_a(1-Yhat)``, and the
expected loss is linear in ``p``. The optimum over the constraint set is
found by enumerating the vertices of the feasible rate region, which is
an intersection of small convex polygons.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .geometry import FEASIBILITY_SLACK, ConvexPolygon, binary_polytope
from .joint import JointBinaryDistribution, LossSpec, RatePoint, gamma

SCHEMA_VERSION = 1
TIE_TOL = 1e-12
CRITERIA = ("equalized_odds", "equal_opportunity")


@dataclass(frozen=True)
class DerivedBinaryPredictor:
    """``p[yhat, a] = Pr{Ytilde=1 | Yhat=yhat, A=a}``, shape ``(2, K)``."""

    groups: tuple
    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.shape != (2, len(self.groups)):
            raise ValueError(f"p must have shape (2, {len(self.groups)})")
        if np.any(p < 0) or np.any(p > 1):
            raise ValueError("flip probabilities must lie in [0, 1]")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "groups", tuple(self.groups))

    @classmethod
    def identity(cls, groups) -> "DerivedBinaryPredictor":
        k = len(groups)
        return cls(tuple(groups), np.vstack([np.zeros(k), np.ones(k)]))

    @classmethod
    def constant(cls, groups, value: int) -> "DerivedBinaryPredictor":
        return cls(tuple(groups), np.full((2, len(groups)), float(value)))

    def randomization(self) -> float:
        """Total distance of the flip probabilities from ``{0, 1}``."""
        return float(np.minimum(self.p, 1.0 - self.p).sum())


@dataclass(frozen=True)
class AdjustmentResult:
    criterion: str
    predictor: DerivedBinaryPredictor
    rates: tuple
    expected_loss: float
    loss: LossSpec
    diagnostics: dict = field(default_factory=dict, compare=False)

    def violation(self) -> float:
        r = np.asarray(self.rates)
        cols = [1] if self.criterion == "equal_opportunity" else [0, 1]
        return float(max(np.ptp(r[:, c]) for c in cols))

    def to_dict(self) -> dict:
        groups = []
        for a, name in enumerate(self.predictor.groups):
            groups.append(
                {
                    "group": str(name),
                    "p_given_pred_0": float(self.predictor.p[0, a]),
                    "p_given_pred_1": float(self.predictor.p[1, a]),
                    "fpr": float(self.rates[a][0]),
                    "tpr": float(self.rates[a][1]),
                }
            )
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "adjustment_result",
            "criterion": self.criterion,
            "loss": {"cost_fp": self.loss.cost_fp, "cost_fn": self.loss.cost_fn},
            "groups": groups,
            "expected_loss": float(self.expected_loss),
            "violation": self.violation(),
            "diagnostics": self.diagnostics,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def predictor_from_dict(data: dict) -> DerivedBinaryPredictor:
    groups = [g["group"] for g in data["groups"]]
    p = [[g["p_given_pred_0"] for g in data["groups"]], [g["p_given_pred_1"] for g in data["groups"]]]
    return DerivedBinaryPredictor(tuple(groups), np.asarray(p))


def derived_joint(joint: JointBinaryDistribution, pred: DerivedBinaryPredictor) -> JointBinaryDistribution:
    """Joint table of ``(A, Ytilde, Y)``."""
    p1 = pred.p.T[:, :, None]  # (K, yhat, 1)
    c = joint.cells
    accept = (p1 * c).sum(axis=1)
    reject = ((1.0 - p1) * c).sum(axis=1)
    cells = np.stack([reject, accept], axis=1)
    return JointBinaryDistribution(joint.groups, cells / cells.sum())


def derived_rates(joint: JointBinaryDistribution, pred: DerivedBinaryPredictor) -> list[RatePoint]:
    return [gamma(derived_joint(joint, pred), a) for a in range(joint.n_groups)]


def expected_loss(joint: JointBinaryDistribution, pred: DerivedBinaryPredictor, loss: LossSpec) -> float:
    """``E l(Ytilde, Y)`` evaluated exactly from the joint table."""
    c = joint.cells  # [a, yhat, y]
    p1 = pred.p.T  # [a, yhat]
    false_pos = float((p1 * c[:, :, 0]).sum())
    false_neg = float(((1.0 - p1) * c[:, :, 1]).sum())
    return loss.cost_fp * false_pos + loss.cost_fn * false_neg


def apply_derived(pred: DerivedBinaryPredictor, yhat, a, rng: np.random.Generator):
    """Draw ``Ytilde`` for prediction(s) ``yhat`` of group(s) ``a``.

    Scalars in, int out; arrays in, int array out.
    """
    from .joint import resolve_group

    yhat_arr = np.asarray(yhat, dtype=int)
    if np.ndim(a) == 0:
        a_idx = resolve_group(pred.groups, a.item() if isinstance(a, np.ndarray) else a)
    else:
        a_idx = np.asarray([resolve_group(pred.groups, v) for v in np.asarray(a).tolist()])
    prob = pred.p[yhat_arr, a_idx]
    out = (rng.random(np.shape(prob)) < prob).astype(int)
    return int(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# Solvers


def _params_for(g: RatePoint, target, prefer=None) -> tuple[float, float]:
    """Flip probabilities ``(p0, p1)`` that move ``gamma_a(Yhat)`` to ``target``.

    Solves ``p1 * g + p0 * (1 - g) = target``. When ``g`` lies on the
    diagonal the system is singular and the least randomised solution is
    chosen.
    """
    f, t = g
    x, y = target
    det = f - t
    if abs(det) > 1e-14:
        # columns (f, t) and (1-f, 1-t)
        p1 = (x * (1 - t) - y * (1 - f)) / det
        p0 = (y * f - x * t) / det
        return float(np.clip(p0, 0, 1)), float(np.clip(p1, 0, 1))
    level = 0.5 * (x + y)
    options = [(level, level)]
    if f < 1:
        options += [((level - f * p1) / (1 - f), p1) for p1 in (0.0, 1.0)]
    if f > 0:
        options += [(p0, (level - (1 - f) * p0) / f) for p0 in (0.0, 1.0)]
    options = [(p0, p1) for p0, p1 in options if -1e-12 <= p0 <= 1 + 1e-12 and -1e-12 <= p1 <= 1 + 1e-12]
    return min(
        ((float(np.clip(p0, 0, 1)), float(np.clip(p1, 0, 1))) for p0, p1 in options),
        key=lambda pp: min(pp[0], 1 - pp[0]) + min(pp[1], 1 - pp[1]),
    )


def _segment_intersection(p, p2, q, q2):
    """Intersection point of two closed segments, or ``None`` (collinear overlaps skipped)."""
    r = p2 - p
    s = q2 - q
    denom = r[0] * s[1] - r[1] * s[0]
    if abs(denom) < 1e-15:
        return None
    qp = q - p
    t = (qp[0] * s[1] - qp[1] * s[0]) / denom
    u = (qp[0] * r[1] - qp[1] * r[0]) / denom
    if -1e-12 <= t <= 1 + 1e-12 and -1e-12 <= u <= 1 + 1e-12:
        return p + t * r
    return None


def _common_rate_candidates(polys: list[ConvexPolygon]) -> np.ndarray:
    cands = [v for poly in polys for v in poly.vertices]
    for i in range(len(polys)):
        for j in range(i + 1, len(polys)):
            for a, b in polys[i].edges():
                for c, d in polys[j].edges():
                    hit = _segment_intersection(a, b, c, d)
                    if hit is not None:
                        cands.append(hit)
    pts = np.asarray(cands, dtype=float)
    feasible = [p for p in pts if all(poly.contains(p, FEASIBILITY_SLACK) for poly in polys)]
    return np.unique(np.round(np.asarray(feasible), 15), axis=0)


def _left_boundary(poly: ConvexPolygon, nu: float) -> float:
    """Smallest fpr of the polygon on the horizontal line ``tpr = nu``."""
    v = poly.vertices
    if len(v) == 2:
        (x0, y0), (x1, y1) = v
        if abs(y1 - y0) < 1e-15:
            return float(min(x0, x1))
        return float(x0 + (nu - y0) / (y1 - y0) * (x1 - x0))
    xs = []
    for a, b in poly.edges():
        lo, hi = min(a[1], b[1]), max(a[1], b[1])
        if lo - 1e-15 <= nu <= hi + 1e-15:
            if abs(b[1] - a[1]) < 1e-15:
                xs.extend([a[0], b[0]])
            else:
                xs.append(a[0] + (nu - a[1]) / (b[1] - a[1]) * (b[0] - a[0]))
    return float(min(xs))


def _finish(joint, loss, criterion, targets, diagnostics) -> AdjustmentResult:
    k = joint.n_groups
    p = np.zeros((2, k))
    for a in range(k):
        p[0, a], p[1, a] = _params_for(gamma(joint, a), targets[a])
    pred = DerivedBinaryPredictor(joint.groups, p)
    rates = tuple(tuple(r) for r in derived_rates(joint, pred))
    return AdjustmentResult(
        criterion=criterion,
        predictor=pred,
        rates=rates,
        expected_loss=expected_loss(joint, pred, loss),
        loss=loss,
        diagnostics=diagnostics,
    )


def _select(cands, losses, fprs, randomization):
    best = losses.min()
    tied = np.flatnonzero(losses <= best + TIE_TOL * max(1.0, abs(best)))
    return min(tied, key=lambda i: (round(fprs[i], 12), randomization(i)))


def derive_equalized_odds(joint: JointBinaryDistribution, loss: LossSpec) -> AdjustmentResult:
    """Loss-optimal derived predictor with equal (fpr, tpr) in every group."""
    joint.require_conditionals()
    if joint.n_groups < 1:
        raise ValueError("need at least one group")
    polys = [binary_polytope(joint, a) for a in range(joint.n_groups)]
    cands = _common_rate_candidates(polys)
    w = joint.cell_weights
    neg, pos = w[:, 0].sum(), w[:, 1].sum()
    losses = loss.cost_fp * neg * cands[:, 0] + loss.cost_fn * pos * (1.0 - cands[:, 1])
    gammas = [gamma(joint, a) for a in range(joint.n_groups)]

    def randomization(i):
        return sum(min(p, 1 - p) for g in gammas for p in _params_for(g, cands[i]))

    i = _select(cands, losses, cands[:, 0], randomization)
    target = tuple(cands[i])
    return _finish(
        joint,
        loss,
        "equalized_odds",
        [target] * joint.n_groups,
        {"method": "vertex_enumeration", "candidates": int(len(cands)), "target": list(map(float, target))},
    )


def derive_equal_opportunity(joint: JointBinaryDistribution, loss: LossSpec) -> AdjustmentResult:
    """Loss-optimal derived predictor with equal tpr in every group."""
    joint.require_conditionals()
    polys = [binary_polytope(joint, a) for a in range(joint.n_groups)]
    nus = np.unique(np.concatenate([[0.0, 1.0], *[p.vertices[:, 1] for p in polys]]))
    w = joint.cell_weights
    xs = np.array([[_left_boundary(p, nu) for p in polys] for nu in nus])  # (n_nu, K)
    losses = (loss.cost_fp * w[:, 0][None, :] * xs).sum(axis=1) + loss.cost_fn * w[:, 1].sum() * (1.0 - nus)
    gammas = [gamma(joint, a) for a in range(joint.n_groups)]

    def randomization(i):
        return sum(min(p, 1 - p) for a, g in enumerate(gammas) for p in _params_for(g, (xs[i, a], nus[i])))

    i = _select(nus, losses, xs.mean(axis=1), randomization)
    targets = [(float(xs[i, a]), float(nus[i])) for a in range(joint.n_groups)]
    return _finish(
        joint,
        loss,
        "equal_opportunity",
        targets,
        {"method": "breakpoint_enumeration", "candidates": int(len(nus)), "tpr": float(nus[i])},
    )


def derive(joint: JointBinaryDistribution, loss: LossSpec, criterion: str) -> AdjustmentResult:
    if criterion == "equalized_odds":
        return derive_equalized_odds(joint, loss)
    if criterion == "equal_opportunity":
        return derive_equal_opportunity(joint, loss)
    raise ValueError(f"unknown criterion {criterion!r}; expected one of {CRITERIA}")
