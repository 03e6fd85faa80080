import numpy as np
import pytest
from hypothesis import settings, strategies as st

from friendrank.ranking import Edge, RankingGraph

_ACCEPTANCE = pytest.StashKey[list]()

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

NAMES = "abcdefgh"


def make_graph(nodes, weights, counts=None):
    """RankingGraph from {(a, b): Y_ab}; either orientation accepted."""
    edges = {}
    for (a, b), v in weights.items():
        if a > b:
            a, b, v = b, a, -v
        edges[(a, b)] = Edge(weight=float(v), count=(counts or {}).get((a, b), 1))
    return RankingGraph(nodes=tuple(sorted(nodes)), edges=dict(sorted(edges.items())))


def beats(*pairs):
    """Weights with Y = 1 for each (winner, loser) pair."""
    return {(w, l): 1.0 for w, l in pairs}


@st.composite
def ranking_graphs(draw, max_nodes=8):
    n = draw(st.integers(1, max_nodes))
    nodes = list(NAMES[:n])
    pairs = [(a, b) for i, a in enumerate(nodes) for b in nodes[i + 1:]]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs))) if pairs else []
    weights = {}
    counts = {}
    for p in chosen:
        c = draw(st.integers(1, 4))
        k = draw(st.integers(-c, c))
        weights[p] = k / c
        counts[p] = c
    return make_graph(nodes, weights, counts)


def random_graph(rng: np.random.Generator, max_nodes=8):
    n = int(rng.integers(1, max_nodes + 1))
    nodes = list(NAMES[:n])
    density = rng.uniform(0.2, 1.0)
    weights, counts = {}, {}
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < density:
                c = int(rng.integers(1, 5))
                weights[(nodes[i], nodes[j])] = int(rng.integers(-c, c + 1)) / c
                counts[(nodes[i], nodes[j])] = c
    return make_graph(nodes, weights, counts)


@pytest.fixture
def golden():
    """The four worked examples: (graph, expected scores in i..l order, cycle ratio)."""
    path = beats(("j", "i"), ("k", "j"), ("l", "k"))
    return {
        "path": (make_graph("ijkl", path), [-1.5, -0.5, 0.5, 1.5], 0.0),
        "three_cycle": (make_graph("ijkl", {**path, **beats(("j", "l"))}), [-0.75, 0.25, 0.25, 0.25], 0.75),
        "four_cycle": (make_graph("ijkl", {**path, **beats(("i", "l"))}), [0.0, 0.0, 0.0, 0.0], 1.0),
        "triangle": (make_graph("ijk", beats(("j", "i"), ("k", "j"), ("k", "i"))), [-2 / 3, 0.0, 2 / 3], 1 / 9),
    }


def pytest_runtest_makereport(item, call):
    if call.when == "call" and item.get_closest_marker("acceptance"):
        doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
        item.config.stash.setdefault(_ACCEPTANCE, []).append((doc, call.excinfo is None))


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(_ACCEPTANCE, [])
    if not results:
        return
    terminalreporter.section("acceptance")
    for label, ok in results:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}")
