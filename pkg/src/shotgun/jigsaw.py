"""Random jigsaw puzzles: pieces, two-phase assembly, aligned-pair blocking.

Grid conventions (row, col), rows grow southwards. ``h[i, j]`` is the
horizontal edge slot above row ``i`` in column ``j`` (``i`` in ``0..n``),
``v[i, j]`` the vertical slot left of column ``j`` in row ``i`` (``j`` in
``0..n``). A piece at ``(i, j)`` carries jigs ``(N, E, S, W) =
(h[i, j], v[i, j+1], h[i+1, j], v[i, j])``.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .generators import as_rng
from .graph import InputError

N_, E_, S_, W_ = 0, 1, 2, 3
STEP = {N_: (-1, 0), E_: (0, 1), S_: (1, 0), W_: (0, -1)}


def opposite(side: int) -> int:
    return (side + 2) % 4


@dataclass(frozen=True, eq=False)
class Puzzle:
    n: int
    q: int
    h_edges: np.ndarray
    v_edges: np.ndarray

    def __post_init__(self):
        h = np.array(self.h_edges, dtype=np.int64)
        v = np.array(self.v_edges, dtype=np.int64)
        if h.shape != (self.n + 1, self.n) or v.shape != (self.n, self.n + 1):
            raise InputError("edge arrays have the wrong shape")
        if h.size and (h.min() < 0 or h.max() >= self.q) or v.size and (v.min() < 0 or v.max() >= self.q):
            raise InputError("edge color outside [0, q)")
        h.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "h_edges", h)
        object.__setattr__(self, "v_edges", v)

    @property
    def num_slots(self) -> int:
        return 2 * self.n * (self.n + 1)

    def jig_grid(self) -> np.ndarray:
        """Array of shape (n, n, 4) with the NESW jigs of each position."""
        h, v, n = self.h_edges, self.v_edges, self.n
        out = np.empty((n, n, 4), dtype=np.int64)
        out[:, :, N_] = h[:-1, :]
        out[:, :, S_] = h[1:, :]
        out[:, :, W_] = v[:, :-1]
        out[:, :, E_] = v[:, 1:]
        return out

    @classmethod
    def from_jig_grid(cls, grid: np.ndarray, q: int) -> "Puzzle":
        grid = np.asarray(grid)
        n = grid.shape[0]
        h = np.empty((n + 1, n), dtype=np.int64)
        v = np.empty((n, n + 1), dtype=np.int64)
        h[:-1, :] = grid[:, :, N_]
        h[-1, :] = grid[-1, :, S_]
        v[:, :-1] = grid[:, :, W_]
        v[:, -1] = grid[:, -1, E_]
        return cls(n, q, h, v)

    def __eq__(self, other):
        if not isinstance(other, Puzzle):
            return NotImplemented
        return (self.n, self.q) == (other.n, other.q) and np.array_equal(self.h_edges, other.h_edges) \
            and np.array_equal(self.v_edges, other.v_edges)

    def to_text(self) -> str:
        lines = [f"puzzle {self.n} {self.q}"]
        lines += [" ".join(map(str, row)) for row in self.h_edges.tolist()]
        lines += [" ".join(map(str, row)) for row in self.v_edges.tolist()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Puzzle":
        rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        if not rows or rows[0][0] != "puzzle" or len(rows[0]) != 3:
            raise InputError("puzzle file must start with 'puzzle n q'")
        n, q = int(rows[0][1]), int(rows[0][2])
        body = rows[1:]
        if len(body) != 2 * n + 1:
            raise InputError(f"expected {2 * n + 1} color rows, found {len(body)}")
        h = [[int(x) for x in r] for r in body[: n + 1]]
        v = [[int(x) for x in r] for r in body[n + 1:]]
        return cls(n, q, np.array(h).reshape(n + 1, n), np.array(v).reshape(n, n + 1))


@dataclass(frozen=True)
class Piece:
    id: int
    jigs: tuple[int, int, int, int]
    # only populated in the distinguishable-border variant
    border: tuple[bool, bool, bool, bool] | None = None


def pieces_in_place(p: Puzzle, with_border: bool = False) -> list[Piece]:
    """Pieces with ids equal to their row-major position (the ground truth)."""
    grid = p.jig_grid()
    n = p.n
    out = []
    for i in range(n):
        for j in range(n):
            border = (i == 0, j == n - 1, i == n - 1, j == 0) if with_border else None
            out.append(Piece(i * n + j, tuple(int(x) for x in grid[i, j]), border))
    return out


def shatter_puzzle(p: Puzzle, seed, with_border: bool = False) -> list[Piece]:
    """All n^2 pieces in random order, renumbered so ids carry no position."""
    rng = as_rng(seed)
    placed = pieces_in_place(p, with_border)
    order = rng.permutation(len(placed))
    return [Piece(k, placed[src].jigs, placed[src].border) for k, src in enumerate(order.tolist())]


@dataclass
class Assembly:
    n: int
    placement: dict[tuple[int, int], int]
    pieces: Sequence[Piece] = field(repr=False)
    complete: bool = False

    def jig_grid(self) -> np.ndarray:
        if not self.complete:
            raise InputError("assembly is incomplete")
        by_id = {pc.id: pc for pc in self.pieces}
        grid = np.empty((self.n, self.n, 4), dtype=np.int64)
        for (i, j), pid in self.placement.items():
            grid[i, j] = by_id[pid].jigs
        return grid

    def to_text(self, verdict: str | None = None) -> str:
        lines = [f"{i} {j} {pid}" for (i, j), pid in sorted(self.placement.items())]
        lines.append(f"# verdict {verdict or ('complete' if self.complete else 'incomplete')}")
        return "\n".join(lines) + "\n"


def truth_assembly(p: Puzzle) -> Assembly:
    pieces = pieces_in_place(p)
    n = p.n
    placement = {(i, j): i * n + j for i in range(n) for j in range(n)}
    return Assembly(n, placement, pieces, True)


class AssemblyError(RuntimeError):
    def __init__(self, message: str, partial: Assembly | None = None):
        super().__init__(message)
        self.partial = partial


class NoSpanningCluster(AssemblyError):
    pass


class AmbiguousCorner(AssemblyError):
    pass


class Stalled(AssemblyError):
    pass


class _Cluster:
    __slots__ = ("pos", "cells")

    def __init__(self, piece: int):
        self.pos = {piece: (0, 0)}
        self.cells = {(0, 0): piece}

    def extent(self) -> tuple[int, int]:
        rows = [r for r, _ in self.cells]
        cols = [c for _, c in self.cells]
        return max(rows) - min(rows) + 1, max(cols) - min(cols) + 1


def unique_color_joins(pieces: Sequence[Piece]) -> list[tuple[int, int, int, int]]:
    """Phase-1 joins ``(color, a, side, b)``: piece ``b`` sits on ``side`` of ``a``.

    A color qualifies when it occurs on exactly two piece sides, on two
    different pieces, facing opposite directions. Sides known to be border
    sides never join.
    """
    occ: dict[int, list[tuple[int, int]]] = defaultdict(list)
    for pc in pieces:
        for side, color in enumerate(pc.jigs):
            if pc.border is not None and pc.border[side]:
                continue
            occ[color].append((pc.id, side))
    joins = []
    for color in sorted(occ):
        sides = occ[color]
        if len(sides) != 2:
            continue
        (a, sa), (b, sb) = sides
        if a == b or sb != opposite(sa):
            continue
        if sa in (S_, E_):
            a, sa, b = b, opposite(sa), a
        joins.append((color, a, sa, b))
    return joins


def _supported(joins: list[tuple[int, int, int, int]]) -> set[int]:
    """Indices of joins lying on a closed square of four joins."""
    east: dict[int, int] = {}
    south: dict[int, int] = {}
    for color, a, side, b in joins:
        # normalised so side is N or W: b is north/west of a
        if side == N_:
            south[b] = a
        else:
            east[b] = a
    on_square: set[tuple[int, int]] = set()
    for a, b in east.items():
        c = south.get(a)
        d = south.get(b)
        if c is not None and d is not None and east.get(c) == d:
            on_square.update({(a, b), (c, d), (a, c), (b, d)})
    keep = set()
    for k, (color, a, side, b) in enumerate(joins):
        if (b, a) in on_square:
            keep.add(k)
    return keep


def phase_one(pieces: Sequence[Piece], n: int) -> list[_Cluster]:
    """Rigid clusters from unique-color joins.

    Joins that close a square of four joins are applied first; a join that
    would put two pieces in one cell, contradict a fixed offset, or make a
    cluster wider or taller than ``n`` is skipped.
    """
    joins = unique_color_joins(pieces)
    strong = _supported(joins)
    order = [k for k in range(len(joins)) if k in strong] + [k for k in range(len(joins)) if k not in strong]
    cluster_of: dict[int, _Cluster] = {pc.id: _Cluster(pc.id) for pc in pieces}
    for k in order:
        _, a, side, b = joins[k]
        ca, cb = cluster_of[a], cluster_of[b]
        dr, dc = STEP[side]
        ra, ca_col = ca.pos[a]
        target = (ra + dr, ca_col + dc)
        if ca is cb:
            continue
        rb, cb_col = cb.pos[b]
        shift = (target[0] - rb, target[1] - cb_col)
        moved = {pid: (r + shift[0], c + shift[1]) for pid, (r, c) in cb.pos.items()}
        if any(cell in ca.cells for cell in moved.values()):
            continue
        rows = [r for r, _ in ca.cells] + [r for r, _ in moved.values()]
        cols = [c for _, c in ca.cells] + [c for _, c in moved.values()]
        if max(rows) - min(rows) >= n or max(cols) - min(cols) >= n:
            continue
        # merge smaller into larger keeping ca's frame
        for pid, cell in moved.items():
            ca.pos[pid] = cell
            ca.cells[cell] = pid
            cluster_of[pid] = ca
    uniq = {id(c): c for c in cluster_of.values()}
    return sorted(uniq.values(), key=lambda c: (-len(c.pos), min(c.pos)))


def _fits(pc: Piece, constraints: dict[int, int], need_border: tuple[bool, ...] | None) -> bool:
    if any(pc.jigs[side] != color for side, color in constraints.items()):
        return False
    if need_border is not None and pc.border is not None and tuple(pc.border) != need_border:
        return False
    return True


def assemble(pieces: Sequence[Piece], n: int) -> Assembly:
    """Two-phase assembly: unique-color clusters, then forced empty corners.

    Raises :class:`NoSpanningCluster`, :class:`AmbiguousCorner` or
    :class:`Stalled`; never guesses.
    """
    if len(pieces) != n * n:
        raise InputError(f"expected {n * n} pieces, got {len(pieces)}")
    if n == 1:
        return Assembly(1, {(0, 0): pieces[0].id}, list(pieces), True)
    clusters = phase_one(pieces, n)
    big = clusters[0]
    height, width = big.extent()
    if height != n or width != n:
        raise NoSpanningCluster(f"largest cluster spans {height}x{width}, need {n}x{n}")
    r0 = min(r for r, _ in big.cells)
    c0 = min(c for _, c in big.cells)
    placement = {(r - r0, c - c0): pid for (r, c), pid in big.cells.items()}
    by_id = {pc.id: pc for pc in pieces}
    bordered = any(pc.border is not None for pc in pieces)
    unused = set(by_id) - set(placement.values())
    index: dict[tuple[int, int], set[int]] = defaultdict(set)
    for pid in unused:
        for side, color in enumerate(by_id[pid].jigs):
            index[(side, color)].add(pid)

    def constraints_at(cell):
        out = {}
        for side, (dr, dc) in STEP.items():
            nb = placement.get((cell[0] + dr, cell[1] + dc))
            if nb is not None:
                out[side] = by_id[nb].jigs[opposite(side)]
        return out

    while unused:
        progressed = False
        corners = [
            (i, j) for i in range(n) for j in range(n)
            if (i, j) not in placement and len(constraints_at((i, j))) >= 2
        ]
        if not corners:
            break
        for cell in corners:
            if cell in placement:
                continue
            cons = constraints_at(cell)
            sets = [index[(side, color)] for side, color in cons.items()]
            cands = set.intersection(*sets) if sets else set()
            need = (cell[0] == 0, cell[1] == n - 1, cell[0] == n - 1, cell[1] == 0) if bordered else None
            cands = {pid for pid in cands if _fits(by_id[pid], cons, need)}
            if len(cands) > 1:
                raise AmbiguousCorner(
                    f"{len(cands)} pieces fit the corner at {cell}",
                    Assembly(n, dict(placement), list(pieces), False),
                )
            if not cands:
                continue
            pid = cands.pop()
            placement[cell] = pid
            unused.discard(pid)
            for side, color in enumerate(by_id[pid].jigs):
                index[(side, color)].discard(pid)
            progressed = True
        if not progressed:
            break
    if unused:
        raise Stalled(
            f"{len(unused)} pieces left with no fillable corner",
            Assembly(n, dict(placement), list(pieces), False),
        )
    result = Assembly(n, placement, list(pieces), True)
    if not verify_assembly(result, pieces, n):
        raise Stalled("filled grid has mismatched jigs", result)
    return result


def verify_assembly(a: Assembly, pieces: Sequence[Piece], n: int) -> bool:
    """Placement is a bijection onto the n x n grid and all shared edges match."""
    if not a.complete:
        raise InputError("cannot verify an incomplete assembly")
    cells = {(i, j) for i in range(n) for j in range(n)}
    if set(a.placement) != cells:
        return False
    ids = list(a.placement.values())
    by_id = {pc.id: pc for pc in pieces}
    if len(set(ids)) != len(ids) or set(ids) != set(by_id):
        return False
    for (i, j), pid in a.placement.items():
        jig = by_id[pid].jigs
        if j + 1 < n and jig[E_] != by_id[a.placement[(i, j + 1)]].jigs[W_]:
            return False
        if i + 1 < n and jig[S_] != by_id[a.placement[(i + 1, j)]].jigs[N_]:
            return False
    return True


class Comparison(str, Enum):
    EXACT = "Exact"
    ROTATION_EQUIVALENT = "RotationEquivalent"
    DIFFERENT = "Different"


def rotate_grid(grid: np.ndarray) -> np.ndarray:
    """Quarter turn clockwise of a jig grid, jig tuples rotated with it."""
    turned = np.rot90(grid, k=-1, axes=(0, 1))
    # the side that pointed west now points north, and so on
    return turned[:, :, [W_, N_, E_, S_]]


def compare_assembly(a: Assembly, truth: Puzzle) -> Comparison:
    grid = a.jig_grid()
    ref = truth.jig_grid()
    if np.array_equal(grid, ref):
        return Comparison.EXACT
    rot = ref
    for _ in range(3):
        rot = rotate_grid(rot)
        if np.array_equal(grid, rot):
            return Comparison.ROTATION_EQUIVALENT
    return Comparison.DIFFERENT


@dataclass(frozen=True)
class AlignedPairWitness:
    """Aligned pairs at column ``col_a`` rows ``2*row_a, 2*row_a+1`` and likewise for b."""

    col_a: int
    row_a: int
    col_b: int
    row_b: int


def _aligned_keys(p: Puzzle) -> tuple[list[tuple[int, int]], np.ndarray, np.ndarray]:
    h, v = p.h_edges, p.v_edges
    pairs, outer, inner = [], [], []
    for j in range(p.n):
        for i in range(p.n // 2):
            top, bot = 2 * i, 2 * i + 1
            pairs.append((j, i))
            outer.append((h[top, j], v[top, j], v[top, j + 1], v[bot, j], v[bot, j + 1], h[bot + 1, j]))
            inner.append(h[bot, j])
    return pairs, np.array(outer, dtype=np.int64).reshape(-1, 6), np.array(inner, dtype=np.int64)


def aligned_pair_count(n: int) -> int:
    """Number of ordered pairs of distinct aligned pairs."""
    k = n * (n // 2)
    return k * (k - 1)


def detect_jigsaw_blocking(p: Puzzle, limit: int | None = None) -> tuple[int, list[AlignedPairWitness]]:
    """Count ordered aligned-pair pairs whose six outer edges agree and whose
    connecting edges differ; return the count and up to ``limit`` witnesses."""
    pairs, outer, inner = _aligned_keys(p)
    groups: dict[tuple, list[int]] = defaultdict(list)
    for k, key in enumerate(map(tuple, outer.tolist())):
        groups[key].append(k)
    count = 0
    witnesses: list[AlignedPairWitness] = []
    for members in groups.values():
        if len(members) < 2:
            continue
        by_inner: dict[int, int] = defaultdict(int)
        for k in members:
            by_inner[int(inner[k])] += 1
        count += len(members) ** 2 - sum(c * c for c in by_inner.values())
        if limit is None or len(witnesses) < limit:
            for x in members:
                for y in members:
                    if inner[x] != inner[y] and (limit is None or len(witnesses) < limit):
                        (ja, ia), (jb, ib) = pairs[x], pairs[y]
                        witnesses.append(AlignedPairWitness(ja, ia, jb, ib))
    return count, witnesses


def expected_jigsaw_blocking(n: int, q: int) -> float:
    return aligned_pair_count(n) * q ** -6 * (1 - 1 / q)


def swap_aligned(a: Assembly, w: AlignedPairWitness) -> Assembly:
    placement = dict(a.placement)
    for dr in (0, 1):
        pa = (2 * w.row_a + dr, w.col_a)
        pb = (2 * w.row_b + dr, w.col_b)
        placement[pa], placement[pb] = a.placement[pb], a.placement[pa]
    return Assembly(a.n, placement, a.pieces, a.complete)


def verify_jigsaw_witness(p: Puzzle, w: AlignedPairWitness) -> bool:
    """Exchanging the two aligned pairs yields a valid, genuinely different assembly."""
    truth = truth_assembly(p)
    swapped = swap_aligned(truth, w)
    if not verify_assembly(swapped, truth.pieces, p.n):
        return False
    return compare_assembly(swapped, p) is Comparison.DIFFERENT


def all_slots_distinct(p: Puzzle) -> bool:
    colors = np.concatenate([p.h_edges.ravel(), p.v_edges.ravel()])
    return np.unique(colors).size == colors.size


def slot_color_multiset(pieces: Iterable[Piece]) -> dict[int, int]:
    out: dict[int, int] = defaultdict(int)
    for pc in pieces:
        for c in pc.jigs:
            out[c] += 1
    return dict(out)
