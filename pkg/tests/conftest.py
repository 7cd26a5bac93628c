import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from glc.config import RunConfig
from glc.dataset import EmbeddingSet
from glc.selftrain import make_scenario


def unit_rows(rng, n, d):
    x = rng.standard_normal((n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def random_embeddings(rng, n, d, c=0, gt=None):
    scores = None
    if c:
        s = rng.random((n, c)) + 1e-3
        scores = s / s.sum(axis=1, keepdims=True)
    return EmbeddingSet(unit_rows(rng, n, d), rng.integers(0, 3, n), scores=scores, gt_labels=gt)


@pytest.fixture(scope="session")
def scenario():
    """The seeded default scenario shared by the slower end-to-end tests."""
    return make_scenario(RunConfig())


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE: dict = {}


@pytest.fixture
def verdict():
    def record(key, ok, detail):
        ACCEPTANCE[key] = f"{key} {'PASS' if ok else 'FAIL'}  {detail}"
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k[1:])):
        terminalreporter.write_line(ACCEPTANCE[key])
