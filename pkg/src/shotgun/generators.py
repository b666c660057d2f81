"""Seeded generators for the random models: lattices, ER graphs, trees, puzzles.

Every generator takes a :class:`Seed`; the pair ``(master, stream)`` feeds a
numpy ``SeedSequence`` whose output keys a Philox counter-based bit generator.
That pairing is part of the experiment format: changing it changes every
recorded result.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .graph import BinaryTree, InputError, LabeledGraph, lattice_graph

log = logging.getLogger(__name__)

MAX_VERTICES = 5_000_000
DENSE_EDGE_P = 0.02
NORMALIZE_TOL = 1e-12


class BudgetError(RuntimeError):
    """Instance would exceed the configured memory budget."""


@dataclass(frozen=True)
class Seed:
    master: int
    stream: int = 0

    def rng(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.master), spawn_key=(int(self.stream),))
        return np.random.Generator(np.random.Philox(ss))


def as_rng(seed: Seed | np.random.Generator | int) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, Seed):
        return seed.rng()
    return Seed(int(seed)).rng()


class LabelDistribution:
    """Distribution of i.i.d. site labels on ``{0, ..., q-1}``."""

    def __init__(self, probabilities: Sequence[float]):
        p = np.asarray(probabilities, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise InputError("need at least one label probability")
        if np.any(p < 0):
            raise InputError("label probabilities must be non-negative")
        total = p.sum()
        if total <= 0:
            raise InputError("label probabilities sum to zero")
        if abs(total - 1.0) > NORMALIZE_TOL:
            log.warning("label distribution sums to %r; normalising", total)
            p = p / total
        p.setflags(write=False)
        self._p: np.ndarray | None = p
        self._q = int(p.size)
        self._uniform = bool(np.allclose(p, 1.0 / p.size, rtol=0, atol=1e-15))

    @classmethod
    def uniform(cls, q: int) -> "LabelDistribution":
        """Uniform labels; the probability vector is only built on request."""
        if q < 1:
            raise InputError("q must be >= 1")
        out = cls.__new__(cls)
        out._p, out._q, out._uniform = None, int(q), True
        return out

    @classmethod
    def point_mass(cls, q: int, label: int = 0) -> "LabelDistribution":
        p = np.zeros(q)
        p[label] = 1.0
        return cls(p)

    @property
    def probabilities(self) -> np.ndarray:
        if self._p is None:
            p = np.full(self._q, 1.0 / self._q)
            p.setflags(write=False)
            self._p = p
        return self._p

    @property
    def q(self) -> int:
        return self._q

    @property
    def is_uniform(self) -> bool:
        return self._uniform

    def moment(self, j: int) -> float:
        """Chance that ``j`` given sites share one label: sum of p_i ** j."""
        if self._uniform:
            return float(self._q) ** (1 - j)
        return float(np.sum(self.probabilities ** j))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self._q == 1:
            return np.zeros(size, dtype=np.int64)
        if self._uniform:
            return rng.integers(0, self._q, size=size, dtype=np.int64)
        return rng.choice(self._q, size=size, p=self.probabilities).astype(np.int64)

    def __repr__(self) -> str:
        if self._uniform:
            return f"LabelDistribution.uniform({self._q})"
        return f"LabelDistribution({self.probabilities.tolist()})"


def _check_budget(count: int) -> None:
    if count > MAX_VERTICES:
        raise BudgetError(f"{count} vertices exceeds budget of {MAX_VERTICES}")


def gen_lattice_labels(n: int, d: int, dist: LabelDistribution, seed) -> np.ndarray:
    if n < 2 or d < 1:
        raise InputError("lattice needs n >= 2 and d >= 1")
    _check_budget(n**d)
    rng = as_rng(seed)
    return dist.sample(rng, n**d).reshape((n,) * d)


def gen_lattice(n: int, d: int, dist: LabelDistribution, seed) -> LabeledGraph:
    return lattice_graph(gen_lattice_labels(n, d, dist, seed), dist.q)


def _pair_from_index(k: np.ndarray, N: int) -> tuple[np.ndarray, np.ndarray]:
    # row i holds pairs (i, i+1..N-1); offsets[i] = index of (i, i+1)
    rows = np.arange(N, dtype=np.int64)
    offsets = rows * (2 * N - rows - 1) // 2
    i = np.searchsorted(offsets, k, side="right") - 1
    j = k - offsets[i] + i + 1
    return i, j


def er_edges(N: int, p: float, rng: np.random.Generator) -> np.ndarray:
    """Edge array of G(N, p), shape (m, 2) with u < v, sorted by pair index.

    Sparse p uses geometric gaps between successes; dense p draws one
    Bernoulli per pair.
    """
    if N < 1:
        raise InputError("N must be >= 1")
    if not 0.0 <= p <= 1.0:
        raise InputError("edge probability must lie in [0, 1]")
    _check_budget(N)
    total = N * (N - 1) // 2
    if total == 0 or p == 0.0:
        return np.zeros((0, 2), dtype=np.int64)
    if p == 1.0:
        k = np.arange(total, dtype=np.int64)
    elif p >= DENSE_EDGE_P:
        k = np.flatnonzero(rng.random(total) < p).astype(np.int64)
    else:
        chunks = []
        pos = -1
        expect = int(total * p + 10 * math.sqrt(total * p) + 16)
        while True:
            gaps = rng.geometric(p, size=expect)
            idx = pos + np.cumsum(gaps)
            chunks.append(idx[idx < total])
            if idx[-1] >= total:
                break
            pos = int(idx[-1])
        k = np.concatenate(chunks).astype(np.int64)
    i, j = _pair_from_index(k, N)
    return np.stack([i, j], axis=1)


def _graph_from_edge_array(N: int, edges: np.ndarray, labels: Sequence[int], q: int) -> LabeledGraph:
    nbrs: list[list[int]] = [[] for _ in range(N)]
    for u, v in edges.tolist():
        nbrs[u].append(v)
        nbrs[v].append(u)
    return LabeledGraph.from_adjacency(nbrs, labels, q)


def gen_er(N: int, p: float, seed) -> LabeledGraph:
    rng = as_rng(seed)
    return _graph_from_edge_array(N, er_edges(N, p, rng), [0] * N, 1)


def gen_labeled_er(N: int, p: float, dist: LabelDistribution, seed) -> LabeledGraph:
    rng = as_rng(seed)
    edges = er_edges(N, p, rng)
    labels = dist.sample(rng, N)
    return _graph_from_edge_array(N, edges, labels.tolist(), dist.q)


def binary_tree_edges(levels: int) -> list[tuple[int, int]]:
    size = 2 ** (levels + 1) - 1
    return [((v - 1) // 2, v) for v in range(1, size)]


def gen_binary_tree(levels: int, q: int, seed) -> LabeledGraph:
    """Heap-indexed full binary tree with ``2**levels`` leaves, uniform labels."""
    if levels < 2 or q < 1:
        raise InputError("binary tree needs levels >= 2 and q >= 1")
    size = 2 ** (levels + 1) - 1
    _check_budget(size)
    rng = as_rng(seed)
    labels = rng.integers(0, q, size=size).tolist()
    return LabeledGraph.from_edges(size, binary_tree_edges(levels), labels, q, BinaryTree(levels))


def gen_jigsaw(n: int, q: int, seed):
    from .jigsaw import Puzzle

    if n < 1 or q < 1:
        raise InputError("puzzle needs n >= 1 and q >= 1")
    _check_budget(2 * n * (n + 1))
    rng = as_rng(seed)
    h = rng.integers(0, q, size=(n + 1, n))
    v = rng.integers(0, q, size=(n, n + 1))
    return Puzzle(n, q, h, v)
