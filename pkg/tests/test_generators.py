import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shotgun.generators import (
    BudgetError,
    LabelDistribution,
    Seed,
    er_edges,
    gen_binary_tree,
    gen_er,
    gen_jigsaw,
    gen_labeled_er,
    gen_lattice,
)
from shotgun.graph import InputError


def test_lattice_small_cases():
    g = gen_lattice(2, 2, LabelDistribution.uniform(3), Seed(1))
    assert g.num_vertices == 4 and g.num_edges == 4
    g = gen_lattice(3, 1, LabelDistribution.uniform(3), Seed(1))
    assert g.edges() == [(0, 1), (1, 2)]
    with pytest.raises(InputError):
        gen_lattice(1, 2, LabelDistribution.uniform(2), Seed(1))


def test_lattice_label_frequency():
    g = gen_lattice(50, 2, LabelDistribution.uniform(2), Seed(2))
    frac = g.labels.count(0) / 2500
    assert abs(frac - 0.5) <= 3 * math.sqrt(0.25 / 2500)


def test_er_extremes():
    assert gen_er(20, 0.0, Seed(0)).num_edges == 0
    assert gen_er(20, 1.0, Seed(0)).num_edges == 190
    with pytest.raises(InputError):
        gen_er(5, 1.5, Seed(0))


@pytest.mark.parametrize("N,p", [(1000, 3 / 1000), (300, 0.05)])
def test_er_edge_count(N, p):
    pairs = N * (N - 1) // 2
    m = gen_er(N, p, Seed(3)).num_edges
    assert abs(m - pairs * p) <= 3 * math.sqrt(pairs * p * (1 - p))


def test_er_sparse_and_dense_paths_agree_in_distribution():
    # same p on both sides of the switch-over: geometric gaps vs Bernoulli draws
    N, reps = 200, 300
    pairs = N * (N - 1) // 2
    for p in (0.019, 0.021):
        counts = [len(er_edges(N, p, Seed(4, t).rng())) for t in range(reps)]
        mean = np.mean(counts)
        assert abs(mean - pairs * p) <= 3 * math.sqrt(pairs * p * (1 - p) / reps)


def test_er_pair_independence():
    # chi-square on the 2x2 table of two fixed pairs across many draws
    N, p, reps = 30, 0.3, 4000
    both = a_only = b_only = neither = 0
    for t in range(reps):
        edges = {tuple(e) for e in er_edges(N, p, Seed(5, t).rng()).tolist()}
        a, b = (0, 1) in edges, (2, 3) in edges
        both += a and b
        a_only += a and not b
        b_only += b and not a
        neither += not a and not b
    obs = np.array([[both, a_only], [b_only, neither]], dtype=float)
    exp = reps * np.outer([p, 1 - p], [p, 1 - p])
    chi2 = ((obs - exp) ** 2 / exp).sum()
    assert chi2 < 16.27  # 3 dof, 0.999 quantile


def test_er_edges_valid():
    e = er_edges(500, 0.01, Seed(6).rng())
    assert np.all(e[:, 0] < e[:, 1]) and e.max() < 500
    assert len({tuple(x) for x in e.tolist()}) == len(e)


def test_labeled_er_reductions():
    g = gen_labeled_er(100, 0.05, LabelDistribution.uniform(1), Seed(7))
    assert set(g.labels) == {0}
    g = gen_labeled_er(100, 0.05, LabelDistribution.point_mass(4, 0), Seed(7))
    assert set(g.labels) == {0}
    # edges are drawn before labels, so the structure matches the unlabeled draw
    assert gen_labeled_er(100, 0.05, LabelDistribution.uniform(3), Seed(7)).adj == gen_er(100, 0.05, Seed(7)).adj


def test_labeled_er_label_counts():
    g = gen_labeled_er(500, 0.01, LabelDistribution.uniform(4), Seed(8))
    for lab in range(4):
        assert abs(g.labels.count(lab) - 125) <= 3 * math.sqrt(500 * 0.25 * 0.75)


def test_binary_tree_shape():
    t = gen_binary_tree(2, 3, Seed(9))
    assert t.num_vertices == 7 and t.num_edges == 6
    degs = [t.degree(v) for v in range(7)]
    assert degs[0] == 2 and degs[1:3] == [3, 3] and degs[3:] == [1] * 4
    assert set(gen_binary_tree(4, 1, Seed(9)).labels) == {0}


def test_jigsaw_shape():
    p = gen_jigsaw(2, 5, Seed(10))
    assert p.num_slots == 12 and p.h_edges.shape == (3, 2) and p.v_edges.shape == (2, 3)
    p = gen_jigsaw(3, 1, Seed(10))
    assert set(p.jig_grid().ravel()) == {0}


def test_jigsaw_unique_colors():
    # colors appearing exactly once among the m slots: mean q (m/q)(1-1/q)^(m-1)
    n, q, reps = 10, 100, 400
    m = 2 * n * (n + 1)
    counts = []
    for t in range(reps):
        p = gen_jigsaw(n, q, Seed(11, t))
        _, c = np.unique(np.concatenate([p.h_edges.ravel(), p.v_edges.ravel()]), return_counts=True)
        counts.append(int(np.sum(c == 1)))
    expect = m * (1 - 1 / q) ** (m - 1)
    se = np.std(counts, ddof=1) / math.sqrt(reps)
    assert abs(np.mean(counts) - expect) <= 3 * se


def test_determinism_and_streams():
    a = gen_lattice(10, 2, LabelDistribution.uniform(3), Seed(42, 5))
    b = gen_lattice(10, 2, LabelDistribution.uniform(3), Seed(42, 5))
    c = gen_lattice(10, 2, LabelDistribution.uniform(3), Seed(42, 6))
    assert a == b and a != c


def test_budget():
    with pytest.raises(BudgetError):
        gen_lattice(3000, 2, LabelDistribution.uniform(2), Seed(0))


def test_distribution_normalises(caplog):
    d = LabelDistribution([1, 1, 2])
    assert np.allclose(d.probabilities, [0.25, 0.25, 0.5])
    assert "normalising" in caplog.text
    with pytest.raises(InputError):
        LabelDistribution([0.5, -0.1])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=8).filter(lambda x: sum(x) > 1e-3), st.integers(2, 6))
def test_moment_inequality(weights, j):
    d = LabelDistribution(weights)
    assert d.moment(j) <= d.moment(2) ** (j / 2) + 1e-12
