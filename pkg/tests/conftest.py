import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from eqodds.joint import ConditionalScoreDistribution, JointBinaryDistribution  # noqa: E402

ACCEPTANCE_LINES = []


def record_acceptance(number, passed, detail, status=None):
    line = f"criterion {number}: {status or ('PASS' if passed else 'FAIL')} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_joint(rng, k=2):
    cells = rng.dirichlet(np.ones(4 * k)).reshape(k, 2, 2)
    return JointBinaryDistribution.from_cells(cells, groups=[f"g{i}" for i in range(k)])


def random_score(rng, n_support=None, k=2):
    from oracles import random_score_instance

    support, raw = random_score_instance(rng, n_support, k)
    return ConditionalScoreDistribution.from_joint_masses([f"g{i}" for i in range(k)], support, raw)


@pytest.fixture
def fixed_joint():
    """A fixed random 8-cell joint used by several derived-value tests."""
    return random_joint(np.random.default_rng(2016))
