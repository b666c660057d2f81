"""Canonical codes and isomorphism for small vertex-colored graphs.

A graph is split into connected components. Tree components get an AHU
string code (linear time, immune to the large automorphism groups of
unlabeled trees). Every other component goes through colour refinement and
individualisation backtracking; leaves of the search tree are compared by
their relabelled edge lists and the minimum is the code. Automorphisms found
along the way prune branches (orbit pruning plus a jump back to the level a
found automorphism makes redundant).

The search counts refinement nodes against a work budget and raises
:class:`BudgetExceeded` past it. In practice random labelled balls of a few
hundred vertices and unlabelled balls of sparse graphs up to a few thousand
vertices finish well inside the default budget; highly regular unlabelled
graphs (large grids, strongly regular graphs) are where it can run out.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from .graph import LabeledGraph, RootedNeighborhood, ball

DEFAULT_BUDGET = 50_000


class BudgetExceeded(RuntimeError):
    """The isomorphism search used more refinement nodes than allowed."""


@dataclass(frozen=True, order=True)
class CanonicalCode:
    """Opaque, totally ordered key; equal iff the colored graphs are isomorphic."""

    bytes: bytes

    def __repr__(self) -> str:
        return f"CanonicalCode({self.bytes[:12].hex()}..., len={len(self.bytes)})"


def _ranks(keys: Sequence[Hashable]) -> list[int]:
    order = {k: i for i, k in enumerate(sorted(set(keys)))}
    return [order[k] for k in keys]


def _refine(adj: Sequence[Sequence[int]], colors: list[int]) -> list[int]:
    ncol = len(set(colors))
    while True:
        sigs = [(colors[v], tuple(sorted([colors[u] for u in nb]))) for v, nb in enumerate(adj)]
        new = _ranks(sigs)
        k = max(new) + 1 if new else 0
        if k == ncol:
            return new
        colors, ncol = new, k


class _Jump(Exception):
    def __init__(self, level: int):
        self.level = level


class _Node:
    __slots__ = ("prefix", "explored", "current")

    def __init__(self, prefix: list[int]):
        self.prefix = prefix
        self.explored: list[int] = []
        self.current = -1


class _Search:
    def __init__(self, adj: Sequence[Sequence[int]], color_values: Sequence[tuple], budget: int):
        self.adj = adj
        self.n = len(adj)
        self.color_values = color_values
        self.budget = budget
        self.nodes = 0
        self.first: tuple[bytes, list[int]] | None = None
        self.best: tuple[bytes, list[int]] | None = None
        self.gens: list[list[int]] = []
        self.stack: list[_Node] = []

    def _leaf_code(self, pos: list[int]) -> bytes:
        n = self.n
        order = [0] * n
        for v, p in enumerate(pos):
            order[p] = v
        flat: list[int] = [n]
        for v in order:
            flat.extend(self.color_values[v])
        edges = sorted(pos[u] * n + pos[w] for u in range(n) for w in self.adj[u] if pos[u] < pos[w])
        flat.append(len(edges))
        flat.extend(edges)
        return np.asarray(flat, dtype=">i8").tobytes()

    def _orbit_rep_explored(self, y: int, explored: list[int], prefix: list[int]) -> bool:
        gens = [g for g in self.gens if all(g[p] == p for p in prefix)]
        if not gens or not explored:
            return False
        # orbit of y under the subgroup generated by gens
        seen = {y}
        queue = [y]
        targets = set(explored)
        while queue:
            u = queue.pop()
            for g in gens:
                w = g[u]
                if w in targets:
                    return True
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        return False

    def _leaf(self, pos: list[int]) -> None:
        code = self._leaf_code(pos)
        if self.best is None:
            self.first = self.best = (code, pos)
            return
        for ref_code, ref_pos in (self.first, self.best):
            if code != ref_code:
                continue
            inv = [0] * self.n
            for v, p in enumerate(pos):
                inv[p] = v
            gamma = [inv[ref_pos[u]] for u in range(self.n)]
            if all(gamma[u] == u for u in range(self.n)):
                continue
            self.gens.append(gamma)
            for level, node in enumerate(self.stack):
                if any(gamma[p] != p for p in node.prefix):
                    break
                if self._orbit_rep_explored(node.current, node.explored, node.prefix):
                    raise _Jump(level)
            break
        if code < self.best[0]:
            self.best = (code, pos)

    def run(self, colors: list[int], prefix: list[int]) -> None:
        self.nodes += 1
        if self.nodes > self.budget:
            raise BudgetExceeded(f"isomorphism search exceeded {self.budget} nodes")
        colors = _refine(self.adj, colors)
        counts = Counter(colors)
        if len(counts) == self.n:
            self._leaf(colors)
            return
        target = min(c for c, k in counts.items() if k > 1)
        members = [v for v in range(self.n) if colors[v] == target]
        node = _Node(prefix)
        self.stack.append(node)
        level = len(self.stack) - 1
        try:
            for y in members:
                if self._orbit_rep_explored(y, node.explored, prefix):
                    continue
                node.current = y
                child = _ranks([(c, 0 if u == y else 1) for u, c in enumerate(colors)])
                try:
                    self.run(child, prefix + [y])
                except _Jump as jump:
                    if jump.level != level:
                        raise
                    continue
                node.explored.append(y)
        finally:
            self.stack.pop()


def _general_code(adj: Sequence[Sequence[int]], color_values: Sequence[tuple], budget: int) -> bytes:
    search = _Search(adj, color_values, budget)
    search.run(_ranks(list(color_values)), [])
    return search.best[0]


def _tree_code(adj: Sequence[Sequence[int]], colors: Sequence[tuple], root: int) -> str:
    parent = {root: -1}
    order = [root]
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for w in adj[u]:
            if w not in parent:
                parent[w] = u
                order.append(w)
                queue.append(w)
    kids: dict[int, list[str]] = {u: [] for u in order}
    code = ""
    for u in reversed(order):
        code = "(" + ",".join(map(str, colors[u])) + ":" + "".join(sorted(kids[u])) + ")"
        if parent[u] >= 0:
            kids[parent[u]].append(code)
    return code


def _tree_centers(adj: Sequence[Sequence[int]]) -> list[int]:
    n = len(adj)
    if n <= 2:
        return list(range(n))
    deg = [len(a) for a in adj]
    leaves = [v for v in range(n) if deg[v] <= 1]
    remaining = n
    while remaining > 2:
        remaining -= len(leaves)
        nxt = []
        for v in leaves:
            for w in adj[v]:
                deg[w] -= 1
                if deg[w] == 1:
                    nxt.append(w)
        leaves = nxt
    return leaves


def _component_code(adj: Sequence[Sequence[int]], colors: Sequence[tuple], budget: int) -> bytes:
    n = len(adj)
    m = sum(len(a) for a in adj) // 2
    if m == n - 1:
        code = min(_tree_code(adj, colors, c) for c in _tree_centers(adj))
        return b"T" + code.encode()
    return b"G" + _general_code(adj, colors, budget)


def canonical_form(adj: Sequence[Sequence[int]], colors: Sequence[tuple], budget: int = DEFAULT_BUDGET) -> CanonicalCode:
    """Canonical code of a graph whose vertices carry integer-tuple colors."""
    n = len(adj)
    seen = [False] * n
    parts: list[bytes] = []
    for s in range(n):
        if seen[s]:
            continue
        seen[s] = True
        comp = [s]
        stack = [s]
        while stack:
            u = stack.pop()
            for w in adj[u]:
                if not seen[w]:
                    seen[w] = True
                    comp.append(w)
                    stack.append(w)
        index = {v: i for i, v in enumerate(comp)}
        sub_adj = [[index[w] for w in adj[v]] for v in comp]
        sub_colors = [tuple(colors[v]) for v in comp]
        parts.append(_component_code(sub_adj, sub_colors, budget))
    if len(parts) == 1:
        return CanonicalCode(parts[0])
    parts.sort()
    blob = b"".join(len(p).to_bytes(8, "big") + p for p in parts)
    return CanonicalCode(b"F" + blob)


def rooted_code(g: LabeledGraph, root: int, budget: int = DEFAULT_BUDGET) -> CanonicalCode:
    colors = [(0 if v == root else 1, lab) for v, lab in enumerate(g.labels)]
    return canonical_form(g.adj, colors, budget)


def canonical_code(nb: RootedNeighborhood, budget: int = DEFAULT_BUDGET) -> CanonicalCode:
    return rooted_code(nb.graph, nb.center, budget)


def ball_code(g: LabeledGraph, v: int, r: int, budget: int = DEFAULT_BUDGET) -> CanonicalCode:
    """Canonical code of the rooted ball of radius ``r`` around ``v``."""
    sub, _ = g.induced(ball(g, v, r))
    return rooted_code(sub, 0, budget)


def graph_code(g: LabeledGraph, budget: int = DEFAULT_BUDGET) -> CanonicalCode:
    return canonical_form(g.adj, [(lab,) for lab in g.labels], budget)


def are_isomorphic(g1: LabeledGraph, g2: LabeledGraph, budget: int = DEFAULT_BUDGET) -> bool:
    """Label-preserving isomorphism test.

    Cheap invariants first, then canonical codes. Raises :class:`BudgetExceeded`
    when a component needs more than ``budget`` search nodes.
    """
    if g1.num_vertices != g2.num_vertices or g1.num_edges != g2.num_edges:
        return False
    if Counter(zip(g1.labels, map(len, g1.adj))) != Counter(zip(g2.labels, map(len, g2.adj))):
        return False
    return graph_code(g1, budget) == graph_code(g2, budget)
