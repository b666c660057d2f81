import itertools
import math
import random

import numpy as np
import pytest

from shotgun.blocking import (
    BlockingWitness,
    Kind,
    apply_switch,
    count_er_blocking,
    count_lattice_blocking,
    count_tree_blocking,
    detect_er_blocking,
    detect_general_blocking,
    detect_labeled_er_blocking,
    detect_lattice_blocking,
    detect_tree_blocking,
    er_blocking_copies,
    expected_er_blocking,
    expected_lattice_blocking,
    expected_lattice_pair_collisions,
    expected_tree_blocking,
    lattice_blocking_pairs,
    tree_blocking_bound,
    verify_blocking_switch,
)
from shotgun.canon import are_isomorphic
from shotgun.generators import LabelDistribution, Seed, binary_tree_edges, gen_binary_tree, gen_er, gen_lattice
from shotgun.graph import BinaryTree, LabeledGraph, lattice_graph
from shotgun.neighborhoods import same_multiset, shatter

from conftest import shuffled


def two_piece(r: int) -> LabeledGraph:
    """Bare path on 2r+1 vertices next to a 2r+1 path with two leaves at each end."""
    k = 2 * r + 1
    edges = [(i, i + 1) for i in range(k - 1)]
    edges += [(k + i, k + i + 1) for i in range(k - 1)]
    a, b = k, 2 * k - 1
    leaf = 2 * k
    edges += [(a, leaf), (a, leaf + 1), (b, leaf + 2), (b, leaf + 3)]
    return LabeledGraph.from_edges(2 * k + 4, edges, [0] * (2 * k + 4), 1)


def lines(r: int, labels_a, labels_b) -> LabeledGraph:
    k = 2 * r + 2
    edges = [(i, i + 1) for i in range(k - 1)] + [(k + i, k + i + 1) for i in range(k - 1)]
    return LabeledGraph.from_edges(2 * k, edges, list(labels_a) + list(labels_b))


def tree(levels: int, labels, q: int) -> LabeledGraph:
    n = 2 ** (levels + 1) - 1
    return LabeledGraph.from_edges(n, binary_tree_edges(levels), labels, q, BinaryTree(levels))


@pytest.mark.parametrize("r", [1, 2, 3])
def test_two_piece_witness(r):
    g = two_piece(r)
    found = detect_er_blocking(g, r)
    assert len(found) == 1 and found[0].kind is Kind.ER_FIG1
    assert verify_blocking_switch(g, found[0], r)
    h, _ = apply_switch(g, found[0])
    assert same_multiset(shatter(g, r), shatter(h, r))
    assert not are_isomorphic(g, h)
    # one radius larger, the neighborhoods tell the two graphs apart
    assert not same_multiset(shatter(g, r + 1), shatter(h, r + 1))


def test_two_piece_general_detector():
    g = two_piece(1)
    found, complete = detect_general_blocking(g, 1)
    assert complete and found
    assert all(verify_blocking_switch(g, w, 1) for w in found)


def test_general_detector_negative():
    k5 = LabeledGraph.from_edges(5, list(itertools.combinations(range(5), 2)), [0] * 5, 1)
    assert detect_general_blocking(k5, 1) == ([], True)
    cycle = LabeledGraph.from_edges(12, [(i, (i + 1) % 12) for i in range(12)], [0] * 12, 1)
    assert detect_general_blocking(cycle, 1) == ([], True)


def test_shell_witness_with_labels():
    # a-v-c-d-e and b-w-c'-d'-e': shells of v and w agree out to distance 2
    # but e and e' differ, so swapping the pendants changes the graph
    edges = [(0, 1), (1, 2), (2, 3), (3, 4), (5, 6), (6, 7), (7, 8), (8, 9)]
    g = LabeledGraph.from_edges(10, edges, [1, 0, 3, 4, 7, 2, 0, 3, 4, 8], 9)
    w = BlockingWitness(Kind.GENERAL, (1, 6))
    assert verify_blocking_switch(g, w, 1)
    found, _ = detect_general_blocking(g, 1)
    assert w in found


def test_lattice_hand_built():
    arr = np.zeros((7, 7), dtype=int)
    arr[1, 1] = 1  # center of the box anchored at (0, 0) with r = 2
    arr[6, 5] = arr[6, 6] = 1  # outside every anchored box; breaks the symmetry
    g = lattice_graph(arr, 2)
    found = detect_lattice_blocking(g, 2)
    # the (0,0) box differs from the three all-zero boxes only at its center
    assert len(found) == 6
    assert BlockingWitness(Kind.LATTICE, ((0, 0), (0, 3), 2)) in found
    assert count_lattice_blocking(g, 2) == 6
    assert verify_blocking_switch(g, found[0], 2)


def test_lattice_r1_counts_unequal_pairs():
    g = gen_lattice(6, 2, LabelDistribution.uniform(2), Seed(1))
    ones = int(g.label_array().sum())
    assert count_lattice_blocking(g, 1) == 2 * ones * (36 - ones)
    assert count_lattice_blocking(lattice_graph(np.zeros((6, 6), int), 1), 1) == 0


def test_lattice_count_matches_detector():
    for t in range(40):
        g = gen_lattice(9, 2, LabelDistribution.uniform(2), Seed(2, t))
        for r in (1, 2, 3):
            assert count_lattice_blocking(g, r) == len(detect_lattice_blocking(g, r))


def test_lattice_witnesses_verify():
    bad = 0
    for t in range(10):
        g = gen_lattice(10, 2, LabelDistribution.uniform(2), Seed(3, t))
        for w in detect_lattice_blocking(g, 2, limit=5):
            bad += not verify_blocking_switch(g, w, 2).ok
    assert bad == 0


def test_lattice_equal_centers_rejected():
    g = lattice_graph(np.zeros((6, 6), dtype=int), 2)
    w = BlockingWitness(Kind.LATTICE, ((0, 0), (3, 3), 2))
    assert not verify_blocking_switch(g, w, 2)


@pytest.mark.parametrize("d,r,q", [(1, 2, 2), (1, 3, 2), (2, 1, 3), (2, 2, 2)])
def test_lattice_pair_probability_brute_force(d, r, q):
    m = (2 * r - 1) ** d
    hits = 0
    for a in itertools.product(range(q), repeat=m):
        for b in itertools.product(range(q), repeat=m):
            c = m // 2
            hits += a[:c] + a[c + 1:] == b[:c] + b[c + 1:] and a[c] != b[c]
    per_pair = hits / q ** (2 * m)
    assert expected_lattice_blocking(2 * (2 * r - 1), d, r, q) == pytest.approx(
        lattice_blocking_pairs(2 * (2 * r - 1), d, r) * per_pair
    )


def test_lattice_pair_examples():
    # side 3 boxes at r = 2 in dimension 1: one off-center site each
    assert expected_lattice_blocking(6, 1, 2, 2) == pytest.approx(2 * (1 / 16 * 4 / 2))
    assert expected_lattice_pair_collisions(4, 1, 2, q=2) == pytest.approx(1.5)
    two = LabelDistribution([0.5, 0.5])
    skew = LabelDistribution([0.7, 0.3])
    assert expected_lattice_pair_collisions(8, 2, 3, dist=skew) > expected_lattice_pair_collisions(8, 2, 3, dist=two)


def test_lattice_blocking_monte_carlo():
    n, d, r, q, trials = 10, 2, 2, 2, 3000
    total = sum(count_lattice_blocking(gen_lattice(n, d, LabelDistribution.uniform(q), Seed(4, t)), r)
                for t in range(trials))
    mean = expected_lattice_blocking(n, d, r, q)
    assert abs(total / trials - mean) < 0.15 * mean


def test_er_copies_exact():
    assert er_blocking_copies(1) == math.factorial(10) / 16
    assert er_blocking_copies(1, literal=True) == 2 * math.factorial(10) / 16
    for r in (2, 3):
        assert er_blocking_copies(r) == pytest.approx(math.factorial(4 * r + 6) / 16)


def test_er_copies_automorphisms():
    # |Aut| of the two-piece graph at r = 1 is 16: count by brute force
    g = two_piece(1)
    edges = {frozenset(e) for e in g.edges()}
    auts = sum(all(frozenset((p[u], p[v])) in edges for u, v in edges) for p in _pendant_perms(g))
    assert auts == 16


def _pendant_perms(g):
    # automorphisms preserve degrees, so only permute within degree classes
    classes = {}
    for v in range(g.num_vertices):
        classes.setdefault(g.degree(v), []).append(v)
    groups = list(classes.values())
    for combo in itertools.product(*(itertools.permutations(c) for c in groups)):
        p = list(range(g.num_vertices))
        for src, dst in zip(groups, combo):
            for a, b in zip(src, dst):
                p[a] = b
        yield p


def test_er_expectation_edges():
    assert expected_er_blocking(60, 1, 0.0) == 0.0
    assert expected_er_blocking(60, 1, 1.0) == 0.0
    assert expected_er_blocking(60, 1, 0.05) == pytest.approx(7.28e-7, rel=1e-2)
    assert expected_er_blocking(60, 1, 0.015) == pytest.approx(0.0131, rel=1e-2)
    assert expected_er_blocking(60, 1, 0.015, literal=True) > expected_er_blocking(60, 1, 0.015)


def test_er_detector_permutation_invariant():
    rng = random.Random(5)
    g = two_piece(1)
    h, perm = shuffled(g, rng)
    assert count_er_blocking(h, 1) == count_er_blocking(g, 1) == 1
    w = detect_er_blocking(h, 1)[0]
    assert verify_blocking_switch(h, w, 1)


def test_er_random_graph_detection_verifies():
    seen = 0
    for t in range(200):
        g = gen_er(60, 0.015, Seed(6, t))
        for w in detect_er_blocking(g, 1):
            assert verify_blocking_switch(g, w, 1)
            seen += 1
    assert seen > 0


def test_labeled_lines():
    g = lines(1, [5, 1, 2, 6], [7, 1, 2, 8])
    found = detect_labeled_er_blocking(g, 1)
    # both ends differ, so either end may be swapped
    assert found == [BlockingWitness(Kind.LABELED_ER, (0, 4)), BlockingWitness(Kind.LABELED_ER, (3, 7))]
    assert all(verify_blocking_switch(g, w, 1) for w in found)
    # reversed second path still matches
    assert detect_labeled_er_blocking(lines(1, [5, 1, 2, 6], [8, 2, 1, 7]), 1)
    # equal first ends: the swap would be invisible
    assert detect_labeled_er_blocking(lines(1, [5, 1, 2, 6], [5, 1, 2, 8]), 1) == []
    assert detect_labeled_er_blocking(lines(1, [5, 1, 2, 6], [5, 1, 2, 6]), 1) == []
    # different interiors
    assert detect_labeled_er_blocking(lines(1, [5, 1, 2, 6], [7, 1, 3, 8]), 1) == []


def test_labeled_lines_permutation():
    g = lines(2, [9, 1, 2, 3, 4, 10], [11, 1, 2, 3, 4, 12])
    h, _ = shuffled(g, random.Random(7))
    assert len(detect_labeled_er_blocking(h, 2)) == len(detect_labeled_er_blocking(g, 2)) == 2
    assert all(verify_blocking_switch(h, w, 2) for w in detect_labeled_er_blocking(h, 2))


def test_tree_hand_built():
    labels = [0] * 15
    labels[3] = labels[5] = 1
    labels[4], labels[6] = 2, 3
    labels[11], labels[12] = 0, 1  # leaves of 5; leaves of 3 stay (0, 0)
    t = tree(3, labels, 4)
    found = detect_tree_blocking(t)
    assert found == [BlockingWitness(Kind.TREE, (3, 5))]
    assert verify_blocking_switch(t, found[0], 1)
    assert count_tree_blocking(t) == 2


def test_tree_single_label():
    t = gen_binary_tree(5, 1, Seed(8))
    assert detect_tree_blocking(t) == [] and count_tree_blocking(t) == 0


def test_tree_expectation_below_bound():
    for levels in range(2, 9):
        for q in range(1, 8):
            assert expected_tree_blocking(levels, q) <= tree_blocking_bound(levels, q) + 1e-12


def test_tree_expectation_brute_force():
    # three levels: left children 3 and 5 with their parents and leaves
    q = 2
    total = 0
    for labs in itertools.product(range(q), repeat=15):
        total += count_tree_blocking(tree(3, labs, q))
    assert total / q**15 == pytest.approx(expected_tree_blocking(3, q))


@pytest.mark.slow
def test_er_expectation_exact_not_literal():
    # at this density the two forms differ by about 14%; 1e5 graphs separate them
    trials = 100_000
    counts = np.array([count_er_blocking(gen_er(60, 0.015, Seed(12, t)), 1) for t in range(trials)])
    mean, se = counts.mean(), counts.std(ddof=1) / math.sqrt(trials)
    assert abs(mean - expected_er_blocking(60, 1, 0.015)) <= 3 * se
    assert abs(mean - expected_er_blocking(60, 1, 0.015, literal=True)) > 3 * se
