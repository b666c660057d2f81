"""Shattering a graph into neighborhoods, overlap uniqueness, reconstruction.

Two observation modes:

* ``rooted``: one rooted ball of radius ``r`` per vertex.
* ``box``: lattice graphs only; one oriented side-``r`` box per anchor,
  ``(n - r + 1) ** d`` of them.

A multiset built from a host graph computes entries lazily, so checks that
only need cheap invariants never materialise every ball.
"""

from __future__ import annotations

from collections import defaultdict
from typing import Iterable, Sequence

import numpy as np

from .canon import DEFAULT_BUDGET, CanonicalCode, ball_code, canonical_code, rooted_code
from .graph import (
    InputError,
    LabeledGraph,
    Lattice,
    LatticeBox,
    RootedNeighborhood,
    ball,
    bfs_distances,
    box_windows,
    extract_neighborhood,
    lattice_graph,
    rows_distinct,
)

ROOTED = "rooted"
BOX = "box"


class ReconstructionError(RuntimeError):
    pass


class AmbiguousOverlap(ReconstructionError):
    """Two entries share the overlap key a gluing step depends on."""


class Inconsistent(ReconstructionError):
    """Keys matched but the glued pieces contradict each other."""


class NeighborhoodMultiset:
    """Multiset of rooted neighborhoods or lattice boxes of one radius.

    Build it with :func:`shatter` (host-backed, lazy) or directly from a list
    of :class:`RootedNeighborhood` / :class:`LatticeBox` (for example one
    assembled by hand or read from disk).
    """

    def __init__(
        self,
        radius: int,
        mode: str,
        entries: Sequence | None = None,
        host: LabeledGraph | None = None,
        box_rows: np.ndarray | None = None,
        d: int | None = None,
        q: int | None = None,
    ):
        if mode not in (ROOTED, BOX):
            raise InputError(f"unknown mode {mode!r}")
        if entries is None and host is None and box_rows is None:
            raise InputError("need entries, box rows or a host graph")
        self.radius = radius
        self.mode = mode
        self.host = host
        self._entries = list(entries) if entries is not None else None
        self._box_rows = box_rows
        self._d = d
        self._q = q
        self._codes: list[CanonicalCode] | None = None

    # -- sizes -------------------------------------------------------------
    def __len__(self) -> int:
        if self.mode == BOX:
            return int(self.box_rows().shape[0])
        if self._entries is not None:
            return len(self._entries)
        return self.host.num_vertices

    @property
    def q(self) -> int:
        if self._q is not None:
            return self._q
        if self.host is not None:
            return self.host.q
        if self.mode == ROOTED and self._entries:
            return max(e.graph.q for e in self._entries)
        return int(self.box_rows().max(initial=0)) + 1

    @property
    def d(self) -> int:
        if self._d is None:
            if self.host is not None:
                self._d = self.host.geometry.d
            else:
                self._d = self._entries[0].d
        return self._d

    # -- materialisation ---------------------------------------------------
    @property
    def entries(self) -> list:
        if self._entries is None:
            if self.mode == ROOTED:
                self._entries = [extract_neighborhood(self.host, v, self.radius) for v in range(self.host.num_vertices)]
            else:
                rows = self.box_rows()
                n = self.host.geometry.n
                from .graph import box_anchors

                anchors = box_anchors(n, self.d, self.radius)
                self._entries = [LatticeBox(a, self.radius, tuple(row.tolist())) for a, row in zip(anchors, rows)]
        return self._entries

    def box_rows(self) -> np.ndarray:
        """Boxes as rows of a ``(count, side**d)`` array (box mode only)."""
        if self.mode != BOX:
            raise InputError("not a box multiset")
        if self._box_rows is None:
            if self.host is not None:
                arr = self.host.label_array()
                self._box_rows = box_windows(arr, (self.radius,) * arr.ndim)
            else:
                self._box_rows = np.array([e.labels for e in self._entries], dtype=np.int64).reshape(
                    len(self._entries), -1
                )
        return self._box_rows

    def codes(self, budget: int = DEFAULT_BUDGET) -> list[CanonicalCode]:
        """Canonical codes in entry order (rooted mode)."""
        if self.mode != ROOTED:
            raise InputError("codes are defined for rooted multisets")
        if self._codes is None:
            if self._entries is None:
                self._codes = [ball_code(self.host, v, self.radius, budget) for v in range(self.host.num_vertices)]
            else:
                self._codes = [canonical_code(nb, budget) for nb in self._entries]
        return self._codes

    def code_counts(self, budget: int = DEFAULT_BUDGET) -> dict:
        if self.mode == BOX:
            return _row_counts(self.box_rows())
        out: dict[CanonicalCode, int] = defaultdict(int)
        for c in self.codes(budget):
            out[c] += 1
        return dict(out)

    def invariants(self) -> list[tuple]:
        """Cheap isomorphism invariants of the rooted entries.

        Equal balls always get equal invariants, so distinct invariants prove
        distinct balls without canonical labelling.
        """
        if self.mode != ROOTED:
            raise InputError("invariants are defined for rooted multisets")
        if self._entries is None:
            return [_host_invariant(self.host, v, self.radius) for v in range(self.host.num_vertices)]
        return [_entry_invariant(nb) for nb in self._entries]


def _row_counts(rows: np.ndarray) -> dict:
    out: dict[bytes, int] = defaultdict(int)
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    for row in rows:
        out[row.tobytes()] += 1
    return dict(out)


def _host_invariant(g: LabeledGraph, v: int, r: int) -> tuple:
    # Degrees of vertices strictly inside the ball equal their host degrees,
    # so only levels 0..r-1 are inspected.
    if r == 0:
        return (g.labels[v],)
    if r == 1:
        return (g.labels[v], len(g.adj[v]), tuple(sorted(g.labels[u] for u in g.adj[v])))
    seen = {v: 0}
    frontier = [v]
    prof = []
    for depth in range(r):
        nxt = []
        for u in frontier:
            prof.append((depth, g.labels[u], len(g.adj[u])))
            if depth + 1 < r:
                for w in g.adj[u]:
                    if w not in seen:
                        seen[w] = depth + 1
                        nxt.append(w)
        frontier = nxt
    prof.sort()
    return (g.labels[v], tuple(prof))


def _entry_invariant(nb: RootedNeighborhood) -> tuple:
    g, v, r = nb.graph, nb.center, nb.radius
    if r == 0:
        return (g.labels[v],)
    if r == 1:
        return (g.labels[v], len(g.adj[v]), tuple(sorted(g.labels[u] for u in g.adj[v])))
    dist = bfs_distances(g, v)
    prof = sorted((dist[u], g.labels[u], len(g.adj[u])) for u in range(g.num_vertices) if 0 <= dist[u] < r)
    return (g.labels[v], tuple(prof))


def shatter(g: LabeledGraph, r: int, mode: str | None = None) -> NeighborhoodMultiset:
    """All radius-``r`` neighborhoods of ``g``.

    ``mode`` defaults to ``box`` for lattice graphs and ``rooted`` otherwise.
    """
    if r < 0:
        raise InputError("radius must be non-negative")
    if mode is None:
        mode = BOX if isinstance(g.geometry, Lattice) else ROOTED
    if mode == BOX and not isinstance(g.geometry, Lattice):
        raise InputError("box mode needs a lattice graph")
    return NeighborhoodMultiset(r, mode, host=g, q=g.q)


def check_overlap_uniqueness(ms: NeighborhoodMultiset, budget: int = DEFAULT_BUDGET) -> bool:
    """True iff the entries are pairwise non-isomorphic (box mode: pairwise unequal).

    Invariants split most pairs; canonical codes settle the rest. Raises
    :class:`~shotgun.canon.BudgetExceeded` when a code cannot be computed.
    """
    if len(ms) == 0:
        raise InputError("empty multiset")
    if ms.mode == BOX:
        return rows_distinct(ms.box_rows())
    groups: dict[tuple, list[int]] = defaultdict(list)
    for i, key in enumerate(ms.invariants()):
        groups[key].append(i)
    for members in groups.values():
        if len(members) < 2:
            continue
        seen = set()
        for i in members:
            if ms.host is not None and ms._entries is None:
                code = ball_code(ms.host, i, ms.radius, budget)
            else:
                code = canonical_code(ms.entries[i], budget)
            if code in seen:
                return False
            seen.add(code)
    return True


def _inner_code(g: LabeledGraph, u: int, r: int, budget: int) -> CanonicalCode:
    sub, _ = g.induced(ball(g, u, r))
    return rooted_code(sub, 0, budget)


def reconstruct(ms: NeighborhoodMultiset, budget: int = DEFAULT_BUDGET, check: bool = True) -> LabeledGraph:
    """Rebuild a graph from its neighborhoods.

    Rooted mode: each entry's center is identified by the code of its
    radius ``r-1`` ball; every neighbor of the center inside the entry has its
    whole ``r-1`` ball inside the entry too, so looking that code up names the
    neighbor. Entries whose ball is a lone vertex need no lookup, which is why
    equal isolated vertices never cause ambiguity.

    Box mode: boxes are chained along each axis by matching the last ``r-1``
    slices of one box with the first ``r-1`` slices of the next.

    Raises :class:`AmbiguousOverlap` or :class:`Inconsistent`.
    """
    if ms.radius < 1:
        raise InputError("reconstruction needs radius >= 1")
    if ms.mode == BOX:
        return _reconstruct_boxes(ms)
    return _reconstruct_rooted(ms, budget, check)


def _reconstruct_rooted(ms: NeighborhoodMultiset, budget: int, check: bool) -> LabeledGraph:
    r = ms.radius
    entries = ms.entries
    n = len(entries)
    lone = [e.graph.num_vertices == 1 for e in entries]
    key_to_entry: dict[CanonicalCode, int] = {}
    for i, e in enumerate(entries):
        if lone[i]:
            continue
        key = _inner_code(e.graph, e.center, r - 1, budget)
        if key in key_to_entry:
            raise AmbiguousOverlap(f"entries {key_to_entry[key]} and {i} share their radius-{r - 1} ball")
        key_to_entry[key] = i
    nbrs: list[set[int]] = [set() for _ in range(n)]
    for i, e in enumerate(entries):
        if lone[i]:
            continue
        for u in e.graph.adj[e.center]:
            j = key_to_entry.get(_inner_code(e.graph, u, r - 1, budget))
            if j is None:
                raise Inconsistent(f"entry {i}: a neighbor's ball matches no entry")
            if j == i or j in nbrs[i]:
                raise Inconsistent(f"entry {i}: neighbors resolve to a repeated or self entry")
            nbrs[i].add(j)
    for i in range(n):
        for j in nbrs[i]:
            if i not in nbrs[j]:
                raise Inconsistent(f"edge {i}-{j} is seen from one side only")
    labels = [e.graph.labels[e.center] for e in entries]
    g = LabeledGraph.from_adjacency([sorted(s) for s in nbrs], labels, ms.q)
    if check:
        for i, e in enumerate(entries):
            if ball_code(g, i, r, budget) != canonical_code(e, budget):
                raise Inconsistent(f"rebuilt ball at {i} differs from its entry")
    return g


def _strip_keys(boxes: np.ndarray, axis: int, head: bool) -> list[bytes]:
    side = boxes.shape[1]
    sl = [slice(None)] * boxes.ndim
    sl[axis + 1] = slice(0, side - 1) if head else slice(1, side)
    part = np.ascontiguousarray(boxes[tuple(sl)]).reshape(boxes.shape[0], -1)
    return [row.tobytes() for row in part]


def _reconstruct_boxes(ms: NeighborhoodMultiset) -> LabeledGraph:
    r, d = ms.radius, ms.d
    rows = np.ascontiguousarray(ms.box_rows(), dtype=np.int64)
    count = rows.shape[0]
    per_axis = round(count ** (1.0 / d))
    while per_axis**d < count:
        per_axis += 1
    while per_axis**d > count:
        per_axis -= 1
    if per_axis**d != count or per_axis < 1:
        raise Inconsistent(f"{count} boxes is not a perfect {d}-th power")
    n = per_axis + r - 1
    boxes = rows.reshape((count,) + (r,) * d)
    if count == 1:
        return lattice_graph(boxes[0], ms.q)
    succ: list[list[int]] = []
    has_pred = np.zeros(count, dtype=bool)
    for axis in range(d):
        heads = _strip_keys(boxes, axis, head=True)
        tails = _strip_keys(boxes, axis, head=False)
        index: dict[bytes, int] = {}
        for i, h in enumerate(heads):
            if h in index:
                raise AmbiguousOverlap(f"two boxes share a leading strip along axis {axis}")
            index[h] = i
        nxt = [index.get(t, -1) for t in tails]
        for j in nxt:
            if j >= 0:
                has_pred[j] = True
        succ.append(nxt)
    origins = np.flatnonzero(~has_pred)
    if origins.size != 1:
        raise AmbiguousOverlap(f"{origins.size} candidate corner boxes")
    grid = -np.ones((per_axis,) * d, dtype=np.int64)
    grid[(0,) * d] = origins[0]
    placed = {int(origins[0])}
    for pos in np.ndindex(*grid.shape):
        i = int(grid[pos])
        if i < 0:
            raise Inconsistent(f"no box reaches position {pos}")
        for axis in range(d):
            j = succ[axis][i]
            nxt_pos = list(pos)
            nxt_pos[axis] += 1
            if nxt_pos[axis] >= per_axis:
                continue
            if j < 0:
                raise Inconsistent(f"box at {pos} has no successor along axis {axis}")
            cur = int(grid[tuple(nxt_pos)])
            if cur < 0:
                if j in placed:
                    raise Inconsistent("a box would be used twice")
                grid[tuple(nxt_pos)] = j
                placed.add(j)
            elif cur != j:
                raise Inconsistent(f"conflicting successors at {tuple(nxt_pos)}")
    arr = -np.ones((n,) * d, dtype=np.int64)
    for pos in np.ndindex(*grid.shape):
        sl = tuple(slice(p, p + r) for p in pos)
        window = arr[sl]
        box = boxes[int(grid[pos])]
        clash = (window >= 0) & (window != box)
        if clash.any():
            raise Inconsistent(f"overlapping boxes disagree near {pos}")
        arr[sl] = box
    return lattice_graph(arr, ms.q)


def same_multiset(a: NeighborhoodMultiset, b: NeighborhoodMultiset, budget: int = DEFAULT_BUDGET) -> bool:
    if a.mode != b.mode or a.radius != b.radius or len(a) != len(b):
        return False
    return a.code_counts(budget) == b.code_counts(budget)


def codes_for(g: LabeledGraph, vertices: Iterable[int], r: int, budget: int = DEFAULT_BUDGET) -> dict:
    """Multiset of ball codes over the given vertices."""
    out: dict[CanonicalCode, int] = defaultdict(int)
    for v in vertices:
        out[ball_code(g, v, r, budget)] += 1
    return dict(out)
