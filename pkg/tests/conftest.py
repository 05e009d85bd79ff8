import numpy as np
import pytest

from vcnet.graph import ConceptGraph
from vcnet.ingest import BoundingBox, Detection, ImageDetections, Vocabulary


def make_graph(n, edges, weighted=True):
    """``edges`` as (u, v) or (u, v, w) tuples in any order."""
    full = [(min(e[0], e[1]), max(e[0], e[1]), float(e[2]) if len(e) > 2 else 1.0) for e in edges]
    return ConceptGraph.from_edges(n, full, weighted=weighted)


def random_graph(rng, n, p=0.3, weighted=True):
    edges = []
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < p:
                edges.append((u, v, 1.0 + rng.exponential(2.0) if weighted else 1.0))
    return make_graph(n, edges, weighted)


def det(concept, box, score=0.9):
    return Detection(concept, BoundingBox(*map(float, box)), score)


def image(path, *dets):
    return ImageDetections(path, tuple(dets))


@pytest.fixture
def small_vocab():
    return Vocabulary("custom", ("person", "car", "dog", "cat", "tree"))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE: list[str] = []


@pytest.fixture
def criterion():
    """Record a one-line PASS/FAIL verdict, then assert it."""
    def record(name, ok, detail=""):
        _ACCEPTANCE.append(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}".rstrip())
        assert ok, f"{name}: {detail}"
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
