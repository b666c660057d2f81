import itertools
import random

import pytest

from shotgun.graph import LabeledGraph


def brute_isomorphic(g1, g2, root1=None, root2=None):
    """Exhaustive search over all bijections (small graphs only)."""
    n = g1.num_vertices
    if n != g2.num_vertices or g1.num_edges != g2.num_edges:
        return False
    e2 = {frozenset(e) for e in g2.edges()}
    for perm in itertools.permutations(range(n)):
        if root1 is not None and perm[root1] != root2:
            continue
        if any(g1.labels[v] != g2.labels[perm[v]] for v in range(n)):
            continue
        if all(frozenset((perm[u], perm[v])) in e2 for u, v in g1.edges()):
            return True
    return False


def random_graph(rng, n, p=0.4, q=2):
    edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]
    labels = [rng.randrange(q) for _ in range(n)]
    return LabeledGraph.from_edges(n, edges, labels, q)


def shuffled(g, rng):
    perm = list(range(g.num_vertices))
    rng.shuffle(perm)
    return g.permuted(perm), perm


def path(k, labels=None):
    return LabeledGraph.from_edges(k, [(i, i + 1) for i in range(k - 1)], labels)


@pytest.fixture
def rng():
    return random.Random(12345)


ACCEPTANCE: dict[int, str] = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    """Note one acceptance result; all are echoed in the terminal summary."""
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPTANCE[criterion] = line
    print(line, flush=True)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
