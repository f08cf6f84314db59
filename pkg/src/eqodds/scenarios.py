"""Two data-generating processes that no oblivious test can tell apart.

Both scenarios use the +/-1 encoding for the group ``A`` and the outcome
``Y``. In Scenario I the outcome depends on the group and the feature
``X2`` is a noisy copy of the outcome; in Scenario II a single feature
``X3`` depends on the group and the outcome depends only on ``X3``. Each
scenario carries two scores, ``r_star`` and ``r_tilde``, that differ by
``A``. The joint law of ``(A, Y, r_star, r_tilde)`` is the same in both.

The samplers return columns as numpy arrays. ``to_table`` maps the
encoding to the package convention: group ``"a=+1"`` is index 1 and
outcome ``+1`` becomes 1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np
from scipy.special import expit
from scipy.stats import ks_2samp

from .joint import ConditionalScoreDistribution, SampleTable, estimate_score_distribution

GROUPS = ("a=-1", "a=+1")
SCORES = ("r_star", "r_tilde")
DEFAULT_N = 100_000
KS_COEFFICIENT = 1.63  # asymptotic 1% critical value of the two-sample KS statistic


class ScenarioRecord(NamedTuple):
    a: int
    y: int
    x1: float | None
    x2: float | None
    x3: float | None
    r_star: float
    r_tilde: float


@dataclass(frozen=True)
class ScenarioSample:
    which: int
    seed: int
    a: np.ndarray
    y: np.ndarray
    features: dict
    r_star: np.ndarray
    r_tilde: np.ndarray

    def __len__(self):
        return len(self.a)

    def records(self) -> Iterator[ScenarioRecord]:
        x1 = self.features.get("x1")
        x2 = self.features.get("x2")
        x3 = self.features.get("x3")
        for i in range(len(self)):
            yield ScenarioRecord(
                int(self.a[i]),
                int(self.y[i]),
                None if x1 is None else float(x1[i]),
                None if x2 is None else float(x2[i]),
                None if x3 is None else float(x3[i]),
                float(self.r_star[i]),
                float(self.r_tilde[i]),
            )

    def score(self, name: str) -> np.ndarray:
        if name not in SCORES:
            raise ValueError(f"score must be one of {SCORES}")
        return getattr(self, name)

    def to_table(self, score: str = "r_star") -> SampleTable:
        group = np.where(self.a > 0, GROUPS[1], GROUPS[0]).astype(object)
        return SampleTable.from_arrays(group, self.score(score), (self.y > 0).astype(int))

    def to_distribution(self, score: str = "r_star") -> ConditionalScoreDistribution:
        return estimate_score_distribution(self.to_table(score), groups=GROUPS)

    def metadata(self) -> dict:
        return {
            "schema_version": 1,
            "kind": "scenario",
            "scenario": self.which,
            "seed": self.seed,
            "n": len(self),
            "encoding": {"group": {"-1": GROUPS[0], "+1": GROUPS[1]}, "outcome": {"-1": 0, "+1": 1}},
            "scores": list(SCORES),
        }

    def metadata_json(self) -> str:
        return json.dumps(self.metadata(), indent=2, sort_keys=True)


def _check_n(n: int) -> None:
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")


def _signed(bits: np.ndarray) -> np.ndarray:
    return np.where(bits, 1, -1).astype(int)


def sample_scenario_one(n: int, seed: int) -> ScenarioSample:
    """A uniform; Pr{Y=y | A=a} = expit(2ay); X1 = A; X2 = Y + N(0, 1)."""
    _check_n(n)
    rng = np.random.default_rng(seed)
    a = _signed(rng.random(n) < 0.5)
    y = _signed(rng.random(n) < expit(2.0 * a))
    x1 = a.astype(float)
    x2 = y + rng.standard_normal(n)
    return ScenarioSample(1, seed, a, y, {"x1": x1, "x2": x2}, x1 + x2, x2.copy())


def sample_scenario_two(n: int, seed: int) -> ScenarioSample:
    """A uniform; X3 | A=a mixes N(a+1, 1) w.p. expit(2a) and N(a-1, 1); Pr{Y=y | X3} = expit(2 y X3)."""
    _check_n(n)
    rng = np.random.default_rng(seed)
    a = _signed(rng.random(n) < 0.5)
    upper = rng.random(n) < expit(2.0 * a)
    x3 = a + np.where(upper, 1.0, -1.0) + rng.standard_normal(n)
    y = _signed(rng.random(n) < expit(2.0 * x3))
    features = {"x3": x3, "component": _signed(upper)}  # latent mixture component, +1 for mean a+1
    return ScenarioSample(2, seed, a, y, features, x3.copy(), x3 - a)


SAMPLERS = {1: sample_scenario_one, 2: sample_scenario_two}


def sample_scenario(which: int, n: int, seed: int) -> ScenarioSample:
    try:
        return SAMPLERS[int(which)](n, seed)
    except KeyError:
        raise ValueError(f"scenario must be 1 or 2, got {which!r}") from None


def ks_band(n1: int, n2: int, coefficient: float = KS_COEFFICIENT) -> float:
    """Critical KS distance for samples of sizes ``n1`` and ``n2``."""
    return coefficient * np.sqrt((n1 + n2) / (n1 * n2))


@dataclass(frozen=True)
class TwoSampleReport:
    n: int
    seeds: tuple
    ks: dict
    cells: dict

    @property
    def passed(self) -> bool:
        return all(v["passed"] for v in self.ks.values()) and all(v["passed"] for v in self.cells.values())

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "kind": "two_sample_report",
            "n": self.n,
            "seeds": list(self.seeds),
            "ks": self.ks,
            "cells": self.cells,
            "all_passed": self.passed,
        }


def compare_samples(s1: ScenarioSample, s2: ScenarioSample, *, sigmas: float = 4.0) -> TwoSampleReport:
    """KS statistics for every ``score | A, Y`` and multinomial checks on ``(A, Y)``."""
    ks = {}
    for score in SCORES:
        for a in (-1, 1):
            for y in (-1, 1):
                u = s1.score(score)[(s1.a == a) & (s1.y == y)]
                v = s2.score(score)[(s2.a == a) & (s2.y == y)]
                stat = float(ks_2samp(u, v).statistic)
                band = float(ks_band(len(u), len(v)))
                ks[f"{score}|a={a:+d},y={y:+d}"] = {"statistic": stat, "band": band, "n1": len(u), "n2": len(v), "passed": stat <= band}
    cells = {}
    n1, n2 = len(s1), len(s2)
    for a in (-1, 1):
        for y in (-1, 1):
            p1 = float(np.mean((s1.a == a) & (s1.y == y)))
            p2 = float(np.mean((s2.a == a) & (s2.y == y)))
            p = (p1 * n1 + p2 * n2) / (n1 + n2)
            sd = float(np.sqrt(p * (1 - p) * (1 / n1 + 1 / n2)))
            cells[f"a={a:+d},y={y:+d}"] = {"freq1": p1, "freq2": p2, "band": sigmas * sd, "passed": abs(p1 - p2) <= sigmas * sd}
    return TwoSampleReport(n1, (s1.seed, s2.seed), ks, cells)


def unidentifiability_check(n: int = DEFAULT_N, seed1: int = 1, seed2: int = 2) -> TwoSampleReport:
    """Compare Scenario I (seed1) with Scenario II (seed2)."""
    return compare_samples(sample_scenario_one(n, seed1), sample_scenario_two(n, seed2))
