"""Blocking configurations: detection, the switch they license, and its check.

A witness names a local pattern and a switch producing a second graph. The
witness is only trusted after :func:`verify_blocking_switch` confirms that
the switched graph has the same neighborhood multiset and is not isomorphic
to the original.

Switches by kind:

* ``GeneralLemma21`` / ``ErFig1`` with sites ``(v, w)``: exchange the labels
  of ``v`` and ``w`` and re-hang the degree-one neighbors of each on the
  other. Everything else a shell can see stays put.
* ``LatticePair`` with sites ``(anchor_a, anchor_b, r)``: exchange the center
  labels of two disjoint side ``2r-1`` boxes.
* ``LabeledErLines`` with sites ``(x, y)``: exchange the labels of two path
  endpoints.
* ``TreeCherry`` with sites ``(b, c)``: exchange the leaf pairs hanging
  below two vertices on the last internal level.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from typing import Iterable

import numpy as np
from scipy.special import gammaln

from .canon import DEFAULT_BUDGET, BudgetExceeded, canonical_form
from .graph import (
    BinaryTree,
    InputError,
    LabeledGraph,
    Lattice,
    ball,
    bfs_distances,
    box_windows,
    components,
    lattice_index,
    lattice_symmetries,
    sphere,
)
from .neighborhoods import codes_for


class Kind(str, Enum):
    GENERAL = "GeneralLemma21"
    LATTICE = "LatticePair"
    ER_FIG1 = "ErFig1"
    LABELED_ER = "LabeledErLines"
    TREE = "TreeCherry"
    JIGSAW = "JigsawAligned"


@dataclass(frozen=True, order=True)
class BlockingWitness:
    kind: Kind
    sites: tuple

    def to_record(self) -> str:
        return "witness " + self.kind.value + " " + " ".join(_flat(self.sites))

    @classmethod
    def from_record(cls, line: str) -> "BlockingWitness":
        parts = line.split()
        if len(parts) < 2 or parts[0] != "witness":
            raise InputError(f"not a witness record: {line!r}")
        kind = Kind(parts[1])
        nums = [int(x) for x in parts[2:]]
        if kind is Kind.LATTICE:
            d = (len(nums) - 1) // 2
            sites = (tuple(nums[:d]), tuple(nums[d: 2 * d]), nums[-1])
        else:
            sites = tuple(nums)
        return cls(kind, sites)


def _flat(x) -> list[str]:
    if isinstance(x, (tuple, list)):
        return [s for item in x for s in _flat(item)]
    return [str(int(x))]


@dataclass(frozen=True)
class SwitchCheck:
    """Outcome of a switch check; ``undetermined`` is set when a budget ran out."""

    ok: bool
    undetermined: bool = False
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


# ---------------------------------------------------------------------------
# switches


def _pendants(g: LabeledGraph, v: int) -> list[int]:
    return [u for u in g.adj[v] if len(g.adj[u]) == 1]


def apply_switch(g: LabeledGraph, w: BlockingWitness) -> tuple[LabeledGraph, set[int]]:
    """Switched graph and the set of vertices whose label or edges changed."""
    if w.kind in (Kind.GENERAL, Kind.ER_FIG1):
        v, x = w.sites
        pv, px = _pendants(g, v), _pendants(g, x)
        adj = [list(a) for a in g.adj]
        for p in pv:
            adj[p] = [x]
        for p in px:
            adj[p] = [v]
        adj[v] = [u for u in adj[v] if u not in pv] + px
        adj[x] = [u for u in adj[x] if u not in px] + pv
        labels = list(g.labels)
        labels[v], labels[x] = labels[x], labels[v]
        return LabeledGraph.from_adjacency(adj, labels, g.q, g.geometry), {v, x, *pv, *px}
    if w.kind is Kind.LABELED_ER:
        x, y = w.sites
        labels = list(g.labels)
        labels[x], labels[y] = labels[y], labels[x]
        return g.with_labels(labels), {x, y}
    if w.kind is Kind.TREE:
        b, c = w.sites
        labels = list(g.labels)
        for off in (1, 2):
            labels[2 * b + off], labels[2 * c + off] = labels[2 * c + off], labels[2 * b + off]
        return g.with_labels(labels), {2 * b + 1, 2 * b + 2, 2 * c + 1, 2 * c + 2}
    if w.kind is Kind.LATTICE:
        a, b, r = w.sites
        n = g.geometry.n
        ca = lattice_index([x + r - 1 for x in a], n)
        cb = lattice_index([x + r - 1 for x in b], n)
        labels = list(g.labels)
        labels[ca], labels[cb] = labels[cb], labels[ca]
        return g.with_labels(labels), {ca, cb}
    raise InputError(f"no graph switch for kind {w.kind}")


def _within(g: LabeledGraph, sources: Iterable[int], r: int) -> set[int]:
    out: set[int] = set()
    for s in sources:
        out.update(ball(g, s, r))
    return out


def _component_union(g: LabeledGraph, sources: Iterable[int]) -> list[int]:
    seen: set[int] = set()
    order: list[int] = []
    for s in sources:
        if s in seen:
            continue
        seen.add(s)
        stack = [s]
        while stack:
            u = stack.pop()
            order.append(u)
            for x in g.adj[u]:
                if x not in seen:
                    seen.add(x)
                    stack.append(x)
    return sorted(order)


def _lattice_boxes_equal(a: np.ndarray, b: np.ndarray, r: int) -> bool:
    ra = box_windows(a, (r,) * a.ndim)
    rb = box_windows(b, (r,) * b.ndim)
    if ra.shape != rb.shape:
        return False
    if ra.shape[1] == 0:
        return True
    return np.array_equal(ra[np.lexsort(ra.T[::-1])], rb[np.lexsort(rb.T[::-1])])


def lattice_equivalent(a: np.ndarray, b: np.ndarray) -> bool:
    """Whether label arrays agree up to a symmetry of the cube."""
    return any(np.array_equal(a, s) for s in lattice_symmetries(b))


def verify_blocking_switch(
    g: LabeledGraph, w: BlockingWitness, r: int, budget: int = DEFAULT_BUDGET, mode: str | None = None
) -> SwitchCheck:
    """Switched graph has the same radius-``r`` neighborhoods and is not isomorphic.

    Only balls within ``r`` of a changed vertex can differ, so the multiset
    comparison runs over those. Components untouched by the switch appear in
    both graphs unchanged and cancel, so isomorphism is decided on the
    touched components alone. Lattice graphs in box mode compare oriented
    side-``r`` boxes and test isomorphism against the cube symmetries.
    """
    if w.kind is Kind.JIGSAW:
        raise InputError("use verify_jigsaw_witness for puzzle witnesses")
    try:
        h, changed = apply_switch(g, w)
    except (IndexError, ValueError) as exc:
        return SwitchCheck(False, reason=f"witness does not fit the graph: {exc}")
    if h == g:
        return SwitchCheck(False, reason="switch is the identity")
    box_mode = isinstance(g.geometry, Lattice) and mode != "rooted"
    if box_mode:
        a, b = g.label_array(), h.label_array()
        if not _lattice_boxes_equal(a, b, r):
            return SwitchCheck(False, reason="box multisets differ")
        if lattice_equivalent(a, b):
            return SwitchCheck(False, reason="switched lattice is a symmetric image")
        return SwitchCheck(True)
    try:
        near = _within(g, changed, r) | _within(h, changed, r)
        if codes_for(g, near, r, budget) != codes_for(h, near, r, budget):
            return SwitchCheck(False, reason="neighborhood multisets differ")
        touched = sorted(set(_component_union(g, changed)) | set(_component_union(h, changed)))
        sub_g, _ = g.induced(touched)
        sub_h, _ = h.induced(touched)
        cg = canonical_form(sub_g.adj, [(x,) for x in sub_g.labels], budget)
        ch = canonical_form(sub_h.adj, [(x,) for x in sub_h.labels], budget)
    except BudgetExceeded as exc:
        return SwitchCheck(False, undetermined=True, reason=str(exc))
    if cg == ch:
        return SwitchCheck(False, reason="switched graph is isomorphic")
    return SwitchCheck(True)


# ---------------------------------------------------------------------------
# general detector


def _shell_code(g: LabeledGraph, v: int, r: int, budget: int):
    shell, _, dists = sphere(g, v, 1, 2 * r)
    return canonical_form(shell.adj, [(dd, lab) for dd, lab in zip(dists, shell.labels)], budget)


def detect_general_blocking(
    g: LabeledGraph, r: int, budget: int = DEFAULT_BUDGET, limit: int | None = None
) -> tuple[list[BlockingWitness], bool]:
    """Pairs ``(v, w)`` with matching shells out to ``2r``, farther apart than
    ``2r``, whose switch is not an isomorphism.

    Shells are matched by isomorphism that preserves labels and distance to
    the respective center. Returns ``(witnesses, complete)``; ``complete``
    is false when some shell or switch exceeded the budget.
    """
    if r < 1:
        raise InputError("need r >= 1")
    complete = True
    groups: dict = defaultdict(list)
    for v in range(g.num_vertices):
        try:
            groups[_shell_code(g, v, r, budget)].append(v)
        except BudgetExceeded:
            complete = False
    out: list[BlockingWitness] = []
    for key in sorted(groups):
        members = groups[key]
        for v, x in combinations(members, 2):
            dist = bfs_distances(g, v, cutoff=2 * r)
            if 0 <= dist[x] <= 2 * r:
                continue
            w = BlockingWitness(Kind.GENERAL, (v, x))
            check = verify_blocking_switch(g, w, r, budget, mode="rooted")
            if check.undetermined:
                complete = False
            if check.ok:
                out.append(w)
                if limit is not None and len(out) >= limit:
                    return out, complete
    return out, complete


# ---------------------------------------------------------------------------
# lattice


def lattice_anchor_grid(n: int, r: int) -> list[int]:
    step = 2 * r - 1
    return list(range(0, n - step + 1, step))


def _lattice_keys(arr: np.ndarray, r: int):
    step = 2 * r - 1
    d = arr.ndim
    grid = lattice_anchor_grid(arr.shape[0], r)
    anchors = [tuple(int(grid[i]) for i in idx) for idx in np.ndindex(*((len(grid),) * d))]
    center = (r - 1,) * d
    keys, centers = [], []
    for a in anchors:
        box = arr[tuple(slice(x, x + step) for x in a)].copy()
        centers.append(int(box[center]))
        box[center] = -1
        keys.append(box.tobytes())
    return anchors, keys, centers


def _anchored_boxes(arr: np.ndarray, r: int) -> np.ndarray:
    step = 2 * r - 1
    d = arr.ndim
    win = np.lib.stride_tricks.sliding_window_view(arr, (step,) * d)
    win = win[tuple(slice(None, None, step) for _ in range(d))]
    return np.ascontiguousarray(win.reshape(-1, step**d))


def _sum_sq_counts(rows: np.ndarray) -> int:
    if rows.shape[1] == 0:
        return rows.shape[0] ** 2
    view = np.ascontiguousarray(rows).view(np.dtype((np.void, rows.dtype.itemsize * rows.shape[1]))).ravel()
    _, counts = np.unique(view, return_counts=True)
    return int(np.sum(counts.astype(np.int64) ** 2))


def count_lattice_blocking(g: LabeledGraph, r: int) -> int:
    """Ordered pairs of disjoint anchored ``2r-1`` boxes equal off-center, centers different."""
    arr = np.asarray(g.label_array(), dtype=np.int64)
    if 2 * r - 1 > arr.shape[0]:
        raise InputError("2r-1 exceeds the lattice side")
    boxes = _anchored_boxes(arr, r)
    mid = ((2 * r - 1) ** arr.ndim) // 2
    masked = np.delete(boxes, mid, axis=1)
    return _sum_sq_counts(masked) - _sum_sq_counts(boxes)


def detect_lattice_blocking(g: LabeledGraph, r: int, limit: int | None = None) -> list[BlockingWitness]:
    arr = g.label_array()
    if 2 * r - 1 > arr.shape[0]:
        raise InputError("2r-1 exceeds the lattice side")
    anchors, keys, centers = _lattice_keys(arr, r)
    by_key: dict[bytes, list[int]] = defaultdict(list)
    for i, k in enumerate(keys):
        by_key[k].append(i)
    out: list[BlockingWitness] = []
    for k in sorted(by_key):
        members = by_key[k]
        for i in members:
            for j in members:
                if centers[i] != centers[j]:
                    out.append(BlockingWitness(Kind.LATTICE, (anchors[i], anchors[j], r)))
                    if limit is not None and len(out) >= limit:
                        return out
    return out


def lattice_blocking_pairs(n: int, d: int, r: int) -> int:
    k = len(lattice_anchor_grid(n, r)) ** d
    return k * (k - 1)


def expected_lattice_blocking(n: int, d: int, r: int, q: int) -> float:
    per_pair = (1.0 / q) ** ((2 * r - 1) ** d - 1) * (1 - 1.0 / q)
    return lattice_blocking_pairs(n, d, r) * per_pair


def expected_lattice_pair_collisions(n: int, d: int, r: int, q: int | None = None, dist=None) -> float:
    """Expected ordered pairs of equal boxes.

    Uniform labels give the exact ``((n-r)^(2d) - 1) q^-((r-1)^d)``; a
    general distribution gives the upper bound in terms of its second
    moment.
    """
    if dist is not None and not dist.is_uniform:
        p2 = dist.moment(2)
        m = (r - 1) ** d
        return n ** (2 * d) * p2**m + 4 * r**d * n**d * p2 ** (m / 2)
    if q is None:
        q = dist.q
    return ((n - r) ** (2 * d) - 1) * float(q) ** (-((r - 1) ** d))


# ---------------------------------------------------------------------------
# Erdos-Renyi blocking components


def _pronged_ends(g: LabeledGraph, comp: list[int], r: int) -> list[int] | None:
    if len(comp) != 2 * r + 5:
        return None
    leaves = [v for v in comp if len(g.adj[v]) == 1]
    if len(leaves) != 4:
        return None
    spine = [v for v in comp if len(g.adj[v]) != 1]
    sub, ids = g.induced(spine)
    from .graph import components as comps_of

    if len(comps_of(sub)) != 1 or sub.num_edges != len(spine) - 1:
        return None
    spine_deg = [len(a) for a in sub.adj]
    if max(spine_deg) > 2:
        return None
    ends = [ids[i] for i, dg in enumerate(spine_deg) if dg <= 1]
    if len(ends) != 2:
        return None
    for e in ends:
        if sum(1 for u in g.adj[e] if len(g.adj[u]) == 1) != 2:
            return None
    return sorted(ends)


def detect_er_blocking(g: LabeledGraph, r: int) -> list[BlockingWitness]:
    """Pairs of components forming the two-piece blocking graph: a bare path on
    ``2r+1`` vertices, and a ``2r+1`` path carrying two pendant leaves at each
    end. Witness sites are ``(bare path endpoint, pronged end)``."""
    if r < 1:
        raise InputError("need r >= 1")
    lines, pronged = [], []
    for comp in components(g):
        if len(comp) == 2 * r + 1:
            order = _path_order(g, comp)
            if order is not None:
                lines.append(min(order[0], order[-1]))
        elif len(comp) == 2 * r + 5:
            ends = _pronged_ends(g, comp, r)
            if ends is not None:
                pronged.append(ends[0])
    return [BlockingWitness(Kind.ER_FIG1, (v, w)) for v in sorted(lines) for w in sorted(pronged)]


def count_er_blocking(g: LabeledGraph, r: int) -> int:
    return len(detect_er_blocking(g, r))


def _path_order(g: LabeledGraph, comp: list[int]) -> list[int] | None:
    if len(comp) == 1:
        return list(comp)
    degs = [len(g.adj[v]) for v in comp]
    if max(degs) > 2 or degs.count(1) != 2:
        return None
    start = min(v for v in comp if len(g.adj[v]) == 1)
    order = [start]
    prev = -1
    while True:
        cur = order[-1]
        nxt = [u for u in g.adj[cur] if u != prev]
        if not nxt:
            break
        prev = cur
        order.append(nxt[0])
    return order if len(order) == len(comp) else None


def _log_binom(n: float, k: float) -> float:
    return float(gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1))


def er_blocking_copies(r: int, literal: bool = False) -> float:
    """Labelled copies of the blocking graph on a fixed set of ``4r+6`` vertices.

    Exact count is ``(4r+6)! / 16`` (each path reverses, each prong pair
    swaps). ``literal=True`` returns the plain product of binomials and
    factorials, which counts each copy twice.
    """
    k = 2 * r + 1
    product = math.comb(4 * r + 6, k) * math.comb(2 * r + 5, 4) * math.comb(4, 2) * 2 * math.factorial(k) ** 2 / 4
    return product if literal else product / 2


def _non_edges(N: int, r: int, literal: bool, conditional: bool) -> float:
    s = 4 * r + 6
    if literal:
        return s * (N - 2 * r + 3) + 4 if conditional else s * (N - 3) + 4
    host = N - s if conditional else N
    return math.comb(s, 2) - (4 * r + 4) + s * (host - s)


def expected_er_blocking(
    N: int, r: int, p: float, literal: bool = False, conditional: bool = False, per_set: bool = False
) -> float:
    """Expected number of vertex sets carrying the blocking graph as components.

    ``per_set`` returns the probability for one fixed set; ``conditional``
    gives that probability given another disjoint set already carries it
    (the host shrinks by ``4r+6`` vertices). ``literal`` switches to the
    uncorrected constant and non-edge exponent. Evaluated in log space.
    """
    s = 4 * r + 6
    if s > N:
        raise InputError("need 4r+6 <= N")
    if p <= 0.0 or p >= 1.0:
        if p == 1.0 or p == 0.0:
            return 0.0
        raise InputError("p must lie in [0, 1]")
    log_x = math.log(er_blocking_copies(r, literal)) + 2 * (2 * r + 2) * math.log(p)
    log_x += _non_edges(N, r, literal, conditional) * math.log1p(-p)
    if per_set:
        return math.exp(log_x)
    host = N - s if conditional else N
    if host < s:
        return 0.0
    return math.exp(_log_binom(host, s) + log_x)


def er_second_moment_ratio(N: int, r: int, p: float) -> float:
    """Closed-form lower bound on ``(E B)^2 / E B^2`` for the blocking count."""
    s = 4 * r + 6
    base = s * math.log(N - s) + (4 * r + 4) * math.log(p)
    num = base + N * s * math.log1p(-p)
    den = base + (N - 2 * r) * s * math.log1p(-p)
    return math.exp(num - np.logaddexp(math.log(8.0), den))


# ---------------------------------------------------------------------------
# labelled Erdos-Renyi: isolated equal-interior paths


def detect_labeled_er_blocking(g: LabeledGraph, r: int) -> list[BlockingWitness]:
    """Pairs of isolated paths on ``2r+2`` vertices with equal interior labels
    (in some orientation) and different labels at both ends. The witness
    swaps one end label between the paths; ends are chosen so no ball sees
    both ends of a path."""
    if r < 1:
        raise InputError("need r >= 1")
    paths = []
    for comp in components(g):
        if len(comp) == 2 * r + 2:
            order = _path_order(g, comp)
            if order is not None:
                paths.append(order)
    by_inner: dict[tuple, list[tuple[int, int]]] = defaultdict(list)
    for i, order in enumerate(paths):
        for orient in (order, order[::-1]):
            inner = tuple(g.labels[v] for v in orient[1:-1])
            by_inner[inner].append((i, orient[0]))
    out = set()
    for inner in sorted(by_inner):
        members = by_inner[inner]
        for (i, head_i), (j, head_j) in combinations(members, 2):
            if i == j:
                continue
            pi = paths[i] if paths[i][0] == head_i else paths[i][::-1]
            pj = paths[j] if paths[j][0] == head_j else paths[j][::-1]
            if g.labels[pi[0]] == g.labels[pj[0]] or g.labels[pi[-1]] == g.labels[pj[-1]]:
                continue
            a, b = sorted((pi[-1], pj[-1]))
            out.add(BlockingWitness(Kind.LABELED_ER, (a, b)))
    return sorted(out)


# ---------------------------------------------------------------------------
# binary tree cherries


def _tree_levels(t: LabeledGraph) -> int:
    if not isinstance(t.geometry, BinaryTree):
        raise InputError("graph has no binary-tree geometry")
    levels = t.geometry.levels
    if levels < 2:
        raise InputError("need at least two levels")
    return levels


def _cherry_parents(levels: int, left_only: bool) -> list[int]:
    lo, hi = 2 ** (levels - 1) - 1, 2**levels - 1
    vs = list(range(lo, hi))
    return [v for v in vs if v % 2 == 1] if left_only else vs


def _cherry_keys(t: LabeledGraph, b: int) -> tuple[tuple[int, int], tuple[int, int]]:
    lab = t.labels
    parent = (b - 1) // 2
    return (lab[b], lab[parent]), tuple(sorted((lab[2 * b + 1], lab[2 * b + 2])))


def detect_tree_blocking(t: LabeledGraph, limit: int | None = None) -> list[BlockingWitness]:
    """Pairs of last-internal-level vertices with different parents, equal
    labels on the vertex and on its parent, and different leaf label sets."""
    levels = _tree_levels(t)
    groups: dict[tuple, list[int]] = defaultdict(list)
    for b in _cherry_parents(levels, left_only=False):
        groups[_cherry_keys(t, b)[0]].append(b)
    out = []
    for key in sorted(groups):
        for b, c in combinations(groups[key], 2):
            if (b - 1) // 2 == (c - 1) // 2:
                continue
            if _cherry_keys(t, b)[1] != _cherry_keys(t, c)[1]:
                out.append(BlockingWitness(Kind.TREE, (b, c)))
                if limit is not None and len(out) >= limit:
                    return out
    return out


def count_tree_blocking(t: LabeledGraph) -> int:
    """Ordered pairs among left children on the last internal level (one per
    parent) with equal vertex and parent labels and different leaf sets."""
    levels = _tree_levels(t)
    groups: dict[tuple, dict[tuple, int]] = defaultdict(lambda: defaultdict(int))
    for b in _cherry_parents(levels, left_only=True):
        key, leaves = _cherry_keys(t, b)
        groups[key][leaves] += 1
    total = 0
    for counts in groups.values():
        size = sum(counts.values())
        total += size * size - sum(c * c for c in counts.values())
    return total


def tree_blocking_bound(levels: int, q: int) -> float:
    return 2.0 ** (2 * (levels - 2)) * q**-2 * (1 - q**-3)


def expected_tree_blocking(levels: int, q: int) -> float:
    """Exact mean of :func:`count_tree_blocking` under uniform labels."""
    k = 2 ** (levels - 2)
    same_set = (2 * q - 1) / q**3
    return k * (k - 1) * q**-2 * (1 - same_set)
