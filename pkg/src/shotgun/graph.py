"""Labeled simple graphs, distances, balls, shells and lattice boxes."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

UNREACHABLE = -1


class InputError(ValueError):
    """Raised on invalid arguments (bad vertex id, out-of-range box, ...)."""


@dataclass(frozen=True)
class Lattice:
    n: int
    d: int


@dataclass(frozen=True)
class BinaryTree:
    """Heap-indexed full binary tree with ``levels`` levels below the root."""

    levels: int


@dataclass(frozen=True, eq=False)
class LabeledGraph:
    """Immutable vertex-labeled simple undirected graph.

    ``adj[v]`` is the sorted tuple of neighbours of ``v``. Labels are 0-based
    integers in ``[0, q)``.
    """

    labels: tuple[int, ...]
    adj: tuple[tuple[int, ...], ...]
    q: int = 1
    geometry: Lattice | BinaryTree | None = None
    _num_edges: int = field(default=-1, repr=False)

    @classmethod
    def from_edges(
        cls,
        num_vertices: int,
        edges: Iterable[tuple[int, int]],
        labels: Sequence[int] | None = None,
        q: int | None = None,
        geometry: Lattice | BinaryTree | None = None,
    ) -> "LabeledGraph":
        nbrs: list[set[int]] = [set() for _ in range(num_vertices)]
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise InputError(f"self-loop at {u}")
            if not (0 <= u < num_vertices and 0 <= v < num_vertices):
                raise InputError(f"edge ({u}, {v}) out of range")
            nbrs[u].add(v)
            nbrs[v].add(u)
        if labels is None:
            labels = [0] * num_vertices
        labels = tuple(int(x) for x in labels)
        if len(labels) != num_vertices:
            raise InputError("labels must have one entry per vertex")
        if q is None:
            q = max(labels, default=0) + 1
        if labels and (min(labels) < 0 or max(labels) >= q):
            raise InputError("label outside [0, q)")
        adj = tuple(tuple(sorted(s)) for s in nbrs)
        m = sum(len(a) for a in adj) // 2
        return cls(labels, adj, q, geometry, m)

    @classmethod
    def from_adjacency(
        cls,
        adj: Sequence[Sequence[int]],
        labels: Sequence[int],
        q: int,
        geometry: Lattice | BinaryTree | None = None,
    ) -> "LabeledGraph":
        """Trusted constructor: ``adj`` must already be symmetric and loop-free."""
        adj_t = tuple(tuple(sorted(int(x) for x in a)) for a in adj)
        m = sum(len(a) for a in adj_t) // 2
        return cls(tuple(int(x) for x in labels), adj_t, q, geometry, m)

    @property
    def num_vertices(self) -> int:
        return len(self.labels)

    @property
    def num_edges(self) -> int:
        if self._num_edges < 0:
            return sum(len(a) for a in self.adj) // 2
        return self._num_edges

    def __len__(self) -> int:
        return len(self.labels)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LabeledGraph):
            return NotImplemented
        return self.labels == other.labels and self.adj == other.adj

    def __hash__(self) -> int:
        return hash((self.labels, self.adj))

    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u, nb in enumerate(self.adj) for v in nb if u < v]

    def degree(self, v: int) -> int:
        return len(self.adj[v])

    def check_vertex(self, v: int) -> None:
        if not 0 <= v < len(self.labels):
            raise InputError(f"vertex {v} not in graph of {len(self.labels)} vertices")

    def induced(self, vertices: Sequence[int]) -> tuple["LabeledGraph", list[int]]:
        """Induced subgraph on ``vertices`` (local ids follow the given order)."""
        index = {v: i for i, v in enumerate(vertices)}
        adj = [[index[u] for u in self.adj[v] if u in index] for v in vertices]
        labels = [self.labels[v] for v in vertices]
        return LabeledGraph.from_adjacency(adj, labels, self.q), list(vertices)

    def with_labels(self, labels: Sequence[int]) -> "LabeledGraph":
        return LabeledGraph(tuple(int(x) for x in labels), self.adj, self.q, self.geometry, self._num_edges)

    def permuted(self, perm: Sequence[int]) -> "LabeledGraph":
        """Relabel vertex ``v`` as ``perm[v]``."""
        n = len(self.labels)
        labels = [0] * n
        adj: list[list[int]] = [[] for _ in range(n)]
        for v in range(n):
            labels[perm[v]] = self.labels[v]
            adj[perm[v]] = [perm[u] for u in self.adj[v]]
        return LabeledGraph.from_adjacency(adj, labels, self.q)

    def label_array(self) -> np.ndarray:
        """Labels reshaped to the lattice shape (lattice graphs only)."""
        if not isinstance(self.geometry, Lattice):
            raise InputError("graph has no lattice geometry")
        n, d = self.geometry.n, self.geometry.d
        return np.asarray(self.labels, dtype=np.int64).reshape((n,) * d)


@dataclass(frozen=True)
class RootedNeighborhood:
    center: int
    graph: LabeledGraph
    radius: int
    local_to_global: tuple[int, ...] | None = None


@dataclass(frozen=True)
class LatticeBox:
    anchor: tuple[int, ...]
    side: int
    labels: tuple[int, ...]

    @property
    def d(self) -> int:
        return len(self.anchor)

    def array(self) -> np.ndarray:
        return np.asarray(self.labels, dtype=np.int64).reshape((self.side,) * self.d)


def bfs_distances(g: LabeledGraph, v: int, cutoff: int | None = None) -> list[int]:
    """Hop distances from ``v``; ``UNREACHABLE`` (-1) marks vertices not reached.

    With ``cutoff`` the search stops expanding past that depth, so anything
    farther is reported as unreachable.
    """
    g.check_vertex(v)
    dist = [UNREACHABLE] * g.num_vertices
    dist[v] = 0
    queue = deque([v])
    adj = g.adj
    while queue:
        u = queue.popleft()
        du = dist[u]
        if cutoff is not None and du >= cutoff:
            continue
        for w in adj[u]:
            if dist[w] < 0:
                dist[w] = du + 1
                queue.append(w)
    return dist


def ball(g: LabeledGraph, v: int, r: int) -> list[int]:
    """Vertices within distance ``r`` of ``v`` in BFS order (``v`` first)."""
    if r < 0:
        raise InputError("radius must be non-negative")
    g.check_vertex(v)
    seen = {v: 0}
    order = [v]
    frontier = [v]
    adj = g.adj
    for depth in range(r):
        nxt = []
        for u in frontier:
            for w in adj[u]:
                if w not in seen:
                    seen[w] = depth + 1
                    order.append(w)
                    nxt.append(w)
        if not nxt:
            break
        frontier = nxt
    return order


def extract_neighborhood(g: LabeledGraph, v: int, r: int) -> RootedNeighborhood:
    vertices = ball(g, v, r)
    sub, _ = g.induced(vertices)
    return RootedNeighborhood(0, sub, r, tuple(vertices))


def sphere(g: LabeledGraph, v: int, s: int, t: int) -> tuple[LabeledGraph, list[int], list[int]]:
    """Shell between distances ``s`` and ``t`` around ``v``.

    Keeps exactly the host edges with both endpoints at distance in ``[s, t]``
    and drops vertices left isolated. Returns ``(shell, global_ids, dists)``
    where ``dists[i]`` is the distance from ``v`` of local vertex ``i``.
    """
    if s <= 0 or s > t:
        raise InputError("need 0 < s <= t")
    dist = bfs_distances(g, v, cutoff=t)
    inside = [u for u in range(g.num_vertices) if s <= dist[u] <= t]
    inside_set = set(inside)
    kept = [u for u in inside if any(w in inside_set for w in g.adj[u])]
    shell, ids = g.induced(kept)
    return shell, ids, [dist[u] for u in ids]


def lattice_index(coord: Sequence[int], n: int) -> int:
    idx = 0
    for c in coord:
        idx = idx * n + int(c)
    return idx


def lattice_coord(idx: int, n: int, d: int) -> tuple[int, ...]:
    out = []
    for _ in range(d):
        idx, c = divmod(idx, n)
        out.append(c)
    return tuple(reversed(out))


def lattice_graph(labels: np.ndarray, q: int) -> LabeledGraph:
    """Nearest-neighbour graph of a label array of shape ``(n,) * d``."""
    labels = np.asarray(labels)
    d = labels.ndim
    n = labels.shape[0]
    if any(s != n for s in labels.shape):
        raise InputError("lattice label array must be a hypercube")
    ids = np.arange(n**d).reshape((n,) * d)
    nbrs: list[list[int]] = [[] for _ in range(n**d)]
    for axis in range(d):
        lo = np.take(ids, range(n - 1), axis=axis).ravel()
        hi = np.take(ids, range(1, n), axis=axis).ravel()
        for a, b in zip(lo.tolist(), hi.tolist()):
            nbrs[a].append(b)
            nbrs[b].append(a)
    return LabeledGraph.from_adjacency(nbrs, labels.ravel().tolist(), q, Lattice(n, d))


def box_anchors(n: int, d: int, side: int) -> list[tuple[int, ...]]:
    per_axis = n - side + 1
    if per_axis <= 0:
        return []
    return [tuple(int(c) for c in a) for a in np.ndindex(*((per_axis,) * d))]


def extract_box(g: LabeledGraph, anchor: Sequence[int], side: int) -> LatticeBox:
    arr = g.label_array()
    n, d = g.geometry.n, g.geometry.d
    anchor = tuple(int(a) for a in anchor)
    if len(anchor) != d or side < 0 or any(a < 0 or a + side > n for a in anchor):
        raise InputError(f"box at {anchor} with side {side} does not fit in [0,{n})^{d}")
    sl = tuple(slice(a, a + side) for a in anchor)
    return LatticeBox(anchor, side, tuple(arr[sl].ravel().tolist()))


def box_windows(arr: np.ndarray, shape: Sequence[int]) -> np.ndarray:
    """All windows of ``shape`` as rows of a 2-D array (anchors in row-major order)."""
    d = arr.ndim
    if any(s <= 0 for s in shape):
        count = int(np.prod([arr.shape[k] - shape[k] + 1 for k in range(d)]))
        return np.zeros((max(count, 0), 0), dtype=arr.dtype)
    win = np.lib.stride_tricks.sliding_window_view(arr, tuple(shape))
    count = int(np.prod(win.shape[:d]))
    return np.ascontiguousarray(win.reshape(count, -1))


def rows_distinct(rows: np.ndarray) -> bool:
    """True iff all rows of a 2-D integer array are pairwise distinct."""
    if rows.shape[0] <= 1:
        return True
    if rows.shape[1] == 0:
        return False
    rows = np.ascontiguousarray(rows)
    view = rows.view(np.dtype((np.void, rows.dtype.itemsize * rows.shape[1]))).ravel()
    return np.unique(view).size == rows.shape[0]


def lattice_symmetries(arr: np.ndarray) -> list[np.ndarray]:
    """Images of ``arr`` under the hyperoctahedral group of the cube."""
    from itertools import permutations, product

    d = arr.ndim
    out = []
    for perm in permutations(range(d)):
        base = np.transpose(arr, perm)
        for flips in product((False, True), repeat=d):
            axes = [k for k, f in enumerate(flips) if f]
            out.append(np.flip(base, axis=axes) if axes else base)
    return out


def components(g: LabeledGraph) -> list[list[int]]:
    seen = [False] * g.num_vertices
    comps = []
    for s in range(g.num_vertices):
        if seen[s]:
            continue
        seen[s] = True
        comp = [s]
        stack = [s]
        while stack:
            u = stack.pop()
            for w in g.adj[u]:
                if not seen[w]:
                    seen[w] = True
                    comp.append(w)
                    stack.append(w)
        comps.append(comp)
    return comps
