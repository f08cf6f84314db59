"""Joint statistics of (prediction or score, protected group, outcome).

Everything downstream works from one of two summaries:

* :class:`JointBinaryDistribution` -- the probability table of
  ``(A, Yhat, Y)`` for a binary predictor.
* :class:`ConditionalScoreDistribution` -- the conditionals ``R | A, Y`` of a
  real-valued score on a shared sorted support, plus the cell weights
  ``Pr{A=a, Y=y}``.

Both are estimated from weighted samples. Groups are indexed ``0..K-1`` in
first-appearance order unless an explicit order is supplied.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import (
    DegenerateLoss,
    EmptyGroupOutcome,
    NegativeWeight,
    NonFiniteScore,
    ParseError,
    UnknownGroup,
)

SUM_TOL = 1e-12


class RatePoint(NamedTuple):
    """A (false positive rate, true positive rate) pair."""

    fpr: float
    tpr: float


class GroupLabel(NamedTuple):
    id: int
    name: str


@dataclass(frozen=True)
class LossSpec:
    """Costs of the two kinds of error; correct decisions cost nothing."""

    cost_fp: float
    cost_fn: float

    def __post_init__(self):
        if not (math.isfinite(self.cost_fp) and math.isfinite(self.cost_fn)):
            raise DegenerateLoss("costs must be finite")
        if self.cost_fp < 0 or self.cost_fn < 0:
            raise DegenerateLoss("costs must be non-negative")
        if self.cost_fp == 0 and self.cost_fn == 0:
            raise DegenerateLoss("at least one cost must be positive")

    @classmethod
    def from_break_even(cls, rate: float) -> "LossSpec":
        """Loss for a lender who profits when ``Pr{Y=1} > rate``.

        Accepting a defaulter costs ``rate``, rejecting a repayer costs
        ``1 - rate``; the ratio is what matters.
        """
        if not 0.0 < rate < 1.0:
            raise DegenerateLoss(f"break-even rate must lie in (0, 1), got {rate}")
        return cls(cost_fp=rate, cost_fn=1.0 - rate)

    def scaled(self, c: float) -> "LossSpec":
        return LossSpec(self.cost_fp * c, self.cost_fn * c)


def resolve_group(groups: Sequence[str], a) -> int:
    """Map a group id, name or :class:`GroupLabel` to its index."""
    if isinstance(a, GroupLabel):
        a = a.id
    if isinstance(a, (int, np.integer)) and not isinstance(a, bool):
        if 0 <= a < len(groups):
            return int(a)
        raise UnknownGroup(f"group index {a} out of range for {len(groups)} groups")
    try:
        return list(groups).index(a)
    except ValueError:
        raise UnknownGroup(f"unknown group {a!r}") from None


# --------------------------------------------------------------------------
# Sample tables and CSV ingestion


@dataclass(frozen=True)
class SampleTable:
    """Columnar weighted samples ``(group, value, outcome, weight)``.

    ``value`` is a binary prediction or a real score depending on use.
    """

    group: np.ndarray
    value: np.ndarray
    outcome: np.ndarray
    weight: np.ndarray

    def __post_init__(self):
        n = len(self.group)
        if not (len(self.value) == len(self.outcome) == len(self.weight) == n):
            raise ValueError("sample columns must have equal length")

    def __len__(self):
        return len(self.group)

    @classmethod
    def from_records(cls, records: Iterable[Sequence]) -> "SampleTable":
        rows = [tuple(r) for r in records]
        groups, values, outcomes, weights = [], [], [], []
        for row in rows:
            if len(row) not in (3, 4):
                raise ValueError(f"expected (group, value, outcome[, weight]), got {row!r}")
            groups.append(row[0])
            values.append(float(row[1]))
            outcomes.append(int(row[2]))
            weights.append(float(row[3]) if len(row) == 4 else 1.0)
        return cls(
            group=np.asarray(groups, dtype=object),
            value=np.asarray(values, dtype=float),
            outcome=np.asarray(outcomes, dtype=int),
            weight=np.asarray(weights, dtype=float),
        )

    @classmethod
    def from_arrays(cls, group, value, outcome, weight=None) -> "SampleTable":
        value = np.asarray(value, dtype=float)
        if weight is None:
            weight = np.ones(len(value))
        return cls(
            group=np.asarray(group, dtype=object),
            value=value,
            outcome=np.asarray(outcome, dtype=int),
            weight=np.asarray(weight, dtype=float),
        )

    @classmethod
    def read_csv(cls, path) -> "SampleTable":
        """Read ``group,score_or_pred,outcome[,weight]`` with a header row."""
        groups, values, outcomes, weights = [], [], [], []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = [h.strip().lower() for h in next(reader)]
            except StopIteration:
                raise ParseError("empty file", line=1) from None
            if len(header) not in (3, 4) or header[0] != "group" or header[2] != "outcome":
                raise ParseError(
                    "header must be group,score_or_pred,outcome[,weight]", line=1
                )
            has_weight = len(header) == 4
            for lineno, row in enumerate(reader, start=2):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != len(header):
                    raise ParseError(f"expected {len(header)} fields, got {len(row)}", line=lineno)
                try:
                    value = float(row[1])
                    outcome = int(row[2])
                    weight = float(row[3]) if has_weight else 1.0
                except ValueError as exc:
                    raise ParseError(str(exc), line=lineno) from None
                if outcome not in (0, 1):
                    raise ParseError(f"outcome must be 0 or 1, got {row[2]!r}", line=lineno)
                groups.append(row[0].strip())
                values.append(value)
                outcomes.append(outcome)
                weights.append(weight)
        return cls.from_arrays(groups, values, outcomes, weights)

    def write_csv(self, path, *, float_format: str = "{!r}") -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["group", "score_or_pred", "outcome", "weight"])
            for g, v, y, w in zip(self.group, self.value, self.outcome, self.weight):
                writer.writerow([g, float_format.format(float(v)), int(y), float_format.format(float(w))])


def _as_table(samples) -> SampleTable:
    if isinstance(samples, SampleTable):
        return samples
    return SampleTable.from_records(samples)


def _group_order(labels: np.ndarray, groups: Sequence[str] | None) -> tuple[list, np.ndarray]:
    if groups is None:
        order: dict = {}
        for g in labels:
            if g not in order:
                order[g] = len(order)
        names = list(order)
    else:
        names = list(groups)
        order = {g: i for i, g in enumerate(names)}
    try:
        idx = np.fromiter((order[g] for g in labels), dtype=np.int64, count=len(labels))
    except KeyError as exc:
        raise UnknownGroup(f"sample group {exc.args[0]!r} not in the supplied group order") from None
    return names, idx


def _check_weights(table: SampleTable) -> None:
    if np.any(table.weight < 0):
        raise NegativeWeight("sample weights must be non-negative")
    if not np.all(np.isfinite(table.weight)):
        raise NegativeWeight("sample weights must be finite")
    bad = (table.outcome != 0) & (table.outcome != 1)
    if np.any(bad):
        raise ValueError("outcomes must be 0 or 1")


# --------------------------------------------------------------------------
# Binary predictor


@dataclass(frozen=True)
class JointBinaryDistribution:
    """Probability table ``cells[a, yhat, y] = Pr{A=a, Yhat=yhat, Y=y}``."""

    groups: tuple
    cells: np.ndarray
    counts: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=float)
        if cells.shape != (len(self.groups), 2, 2):
            raise ValueError(f"cells must have shape ({len(self.groups)}, 2, 2), got {cells.shape}")
        if np.any(cells < 0):
            raise ValueError("cell probabilities must be non-negative")
        if abs(cells.sum() - 1.0) > SUM_TOL:
            raise ValueError(f"cells must sum to 1, got {cells.sum()!r}")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "groups", tuple(self.groups))

    @classmethod
    def from_cells(cls, cells, groups=None) -> "JointBinaryDistribution":
        cells = np.asarray(cells, dtype=float)
        cells = cells / cells.sum()
        if groups is None:
            groups = tuple(str(i) for i in range(cells.shape[0]))
        return cls(groups=tuple(groups), cells=cells)

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    def labels(self) -> list[GroupLabel]:
        return [GroupLabel(i, str(g)) for i, g in enumerate(self.groups)]

    @property
    def priors(self) -> np.ndarray:
        return self.cells.sum(axis=(1, 2))

    @property
    def cell_weights(self) -> np.ndarray:
        """``Pr{A=a, Y=y}`` with shape ``(K, 2)``."""
        return self.cells.sum(axis=1)

    @property
    def base_rates(self) -> np.ndarray:
        return self.cell_weights[:, 1] / self.priors

    def index(self, a) -> int:
        return resolve_group(self.groups, a)

    def require_conditionals(self, groups=None) -> None:
        w = self.cell_weights
        for a in range(self.n_groups) if groups is None else groups:
            for y in (0, 1):
                if w[a, y] <= 0:
                    raise EmptyGroupOutcome(self.groups[a], y)

    def flipped(self) -> "JointBinaryDistribution":
        """The joint of ``1 - Yhat``."""
        return JointBinaryDistribution(self.groups, self.cells[:, ::-1, :].copy())


def estimate_binary_joint(samples, *, groups: Sequence[str] | None = None) -> JointBinaryDistribution:
    """Weighted empirical estimate of the ``(A, Yhat, Y)`` table.

    ``samples`` is a :class:`SampleTable` or an iterable of
    ``(group, prediction, outcome[, weight])`` records.
    """
    table = _as_table(samples)
    _check_weights(table)
    pred = table.value
    if np.any((pred != 0) & (pred != 1)):
        raise ValueError("binary predictions must be 0 or 1")
    names, gidx = _group_order(table.group, groups)
    k = len(names)
    flat = (gidx * 2 + pred.astype(np.int64)) * 2 + table.outcome
    mass = np.bincount(flat, weights=table.weight, minlength=4 * k).reshape(k, 2, 2)
    counts = np.bincount(flat[table.weight > 0], minlength=4 * k).reshape(k, 2, 2)
    cond = mass.sum(axis=1)
    for a in range(k):
        for y in (0, 1):
            if cond[a, y] <= 0:
                raise EmptyGroupOutcome(names[a], y)
    return JointBinaryDistribution(tuple(names), mass / mass.sum(), counts=counts)


def gamma(joint: JointBinaryDistribution, a) -> RatePoint:
    """False and true positive rate of the predictor within group ``a``."""
    i = joint.index(a)
    joint.require_conditionals([i])
    c = joint.cells[i]
    return RatePoint(c[1, 0] / (c[0, 0] + c[1, 0]), c[1, 1] / (c[0, 1] + c[1, 1]))


# --------------------------------------------------------------------------
# Real-valued score


@dataclass(frozen=True)
class ConditionalScoreDistribution:
    """Conditionals ``R | A=a, Y=y`` on a shared sorted support.

    ``masses[a, y, i]`` is ``Pr{R = support[i] | A=a, Y=y}``; each row sums
    to one. ``cell_weights[a, y]`` is ``Pr{A=a, Y=y}``.
    """

    groups: tuple
    support: np.ndarray
    masses: np.ndarray
    cell_weights: np.ndarray
    counts: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        support = np.asarray(self.support, dtype=float)
        masses = np.asarray(self.masses, dtype=float)
        weights = np.asarray(self.cell_weights, dtype=float)
        k = len(self.groups)
        if support.ndim != 1 or support.size == 0:
            raise ValueError("support must be a non-empty 1-d array")
        if not np.all(np.isfinite(support)):
            raise NonFiniteScore("support points must be finite")
        if np.any(np.diff(support) <= 0):
            raise ValueError("support points must be strictly increasing")
        if masses.shape != (k, 2, support.size):
            raise ValueError(f"masses must have shape ({k}, 2, {support.size}), got {masses.shape}")
        if weights.shape != (k, 2):
            raise ValueError(f"cell_weights must have shape ({k}, 2)")
        if np.any(masses < 0) or np.any(weights < 0):
            raise ValueError("masses and weights must be non-negative")
        for a in range(k):
            for y in (0, 1):
                if weights[a, y] <= 0:
                    raise EmptyGroupOutcome(self.groups[a], y)
                if abs(masses[a, y].sum() - 1.0) > SUM_TOL:
                    raise ValueError(f"conditional ({a}, {y}) sums to {masses[a, y].sum()!r}")
        if abs(weights.sum() - 1.0) > SUM_TOL:
            raise ValueError("cell weights must sum to 1")
        for arr in (support, masses, weights):
            arr.setflags(write=False)
        object.__setattr__(self, "groups", tuple(self.groups))
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "cell_weights", weights)

    @classmethod
    def from_joint_masses(cls, groups, support, joint_masses, counts=None):
        """Build from unnormalised ``mass[a, y, i]`` (e.g. weighted counts).

        Support points carrying no mass at all are dropped.
        """
        support = np.asarray(support, dtype=float)
        joint_masses = np.asarray(joint_masses, dtype=float)
        keep = joint_masses.sum(axis=(0, 1)) > 0
        support, joint_masses = support[keep], joint_masses[:, :, keep]
        order = np.argsort(support, kind="stable")
        # fancy indexing on the last axis yields a strided array, whose sums
        # lose numpy's pairwise accuracy over long supports
        support, joint_masses = support[order], np.ascontiguousarray(joint_masses[:, :, order])
        cell = joint_masses.sum(axis=2)
        for a in range(cell.shape[0]):
            for y in (0, 1):
                if cell[a, y] <= 0:
                    raise EmptyGroupOutcome(tuple(groups)[a], y)
        masses = joint_masses / cell[:, :, None]
        masses = masses / masses.sum(axis=2, keepdims=True)
        return cls(tuple(groups), support, masses, cell / cell.sum(), counts=counts)

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    def labels(self) -> list[GroupLabel]:
        return [GroupLabel(i, str(g)) for i, g in enumerate(self.groups)]

    def index(self, a) -> int:
        return resolve_group(self.groups, a)

    @property
    def priors(self) -> np.ndarray:
        return self.cell_weights.sum(axis=1)

    @property
    def base_rates(self) -> np.ndarray:
        return self.cell_weights[:, 1] / self.priors

    def conditional(self, a, y: int) -> tuple[np.ndarray, np.ndarray]:
        """Support points and masses of ``R | A=a, Y=y`` (positive mass only)."""
        m = self.masses[self.index(a), y]
        keep = m > 0
        return self.support[keep], m[keep]

    def cdf(self, a, y: int, t) -> np.ndarray:
        """``Pr{R <= t | A=a, Y=y}``, vectorised over ``t``."""
        cum = np.concatenate([[0.0], np.cumsum(self.masses[self.index(a), y])])
        pos = np.searchsorted(self.support, np.asarray(t, dtype=float), side="right")
        return np.minimum(cum[pos], 1.0)

    def survival(self, a, y: int, t) -> np.ndarray:
        """``Pr{R > t | A=a, Y=y}``; ``t = -inf`` gives 1 and ``t = +inf`` gives 0.

        Summed from the top so that small tail probabilities stay exact.
        """
        m = self.masses[self.index(a), y]
        tail = np.concatenate([np.cumsum(m[::-1])[::-1], [0.0]])
        tail[0] = 1.0
        pos = np.searchsorted(self.support, np.asarray(t, dtype=float), side="right")
        return np.minimum(tail[pos], 1.0)

    def group_masses(self, a) -> np.ndarray:
        """Marginal ``Pr{R = s_i | A=a}`` on the shared support."""
        i = self.index(a)
        w = self.cell_weights[i]
        return (w[0] * self.masses[i, 0] + w[1] * self.masses[i, 1]) / w.sum()

    def group_cdf(self, a, t) -> np.ndarray:
        cum = np.concatenate([[0.0], np.cumsum(self.group_masses(a))])
        pos = np.searchsorted(self.support, np.asarray(t, dtype=float), side="right")
        return np.minimum(cum[pos], 1.0)

    def pooled_masses(self) -> np.ndarray:
        return np.einsum("ay,ayi->i", self.cell_weights, self.masses)

    def group_support(self, a) -> np.ndarray:
        i = self.index(a)
        return self.support[(self.masses[i, 0] + self.masses[i, 1]) > 0]

    def subset(self, groups: Sequence) -> "ConditionalScoreDistribution":
        idx = [self.index(g) for g in groups]
        joint = self.masses[idx] * self.cell_weights[idx][:, :, None]
        return ConditionalScoreDistribution.from_joint_masses(
            [self.groups[i] for i in idx], self.support, joint
        )


def estimate_score_distribution(samples, *, groups: Sequence[str] | None = None) -> ConditionalScoreDistribution:
    """Weighted empirical ``R | A, Y`` with duplicate scores merged."""
    table = _as_table(samples)
    _check_weights(table)
    if not np.all(np.isfinite(table.value)):
        raise NonFiniteScore("scores must be finite")
    names, gidx = _group_order(table.group, groups)
    k = len(names)
    support, inv = np.unique(table.value, return_inverse=True)
    s = support.size
    flat = (gidx * 2 + table.outcome) * s + inv.reshape(-1)
    mass = np.bincount(flat, weights=table.weight, minlength=2 * k * s).reshape(k, 2, s)
    pos = table.weight > 0
    counts = np.bincount((gidx * 2 + table.outcome)[pos], minlength=2 * k).reshape(k, 2)
    return ConditionalScoreDistribution.from_joint_masses(names, support, mass, counts=counts)


def read_samples(path: str | Path, kind: str, *, groups=None):
    """Load a samples CSV as a binary joint (``kind='binary'``) or score distribution."""
    table = SampleTable.read_csv(path)
    if kind == "binary":
        return estimate_binary_joint(table, groups=groups)
    if kind == "score":
        return estimate_score_distribution(table, groups=groups)
    raise ValueError(f"kind must be 'binary' or 'score', got {kind!r}")
