"""How many random neighborhood samples reconstruction needs.

Upper bound by coupon collecting, a general second-moment lower bound driven
by neighborhood sizes and pairwise union sizes, the lattice specialisation,
and a Monte Carlo simulator. Logarithms are natural throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.special import logsumexp

from .canon import are_isomorphic
from .generators import as_rng
from .graph import InputError, LabeledGraph, ball, extract_neighborhood
from .neighborhoods import ROOTED, NeighborhoodMultiset, ReconstructionError, check_overlap_uniqueness, reconstruct, shatter

SCAN_WORK = 200_000_000


@dataclass(frozen=True)
class SamplingBounds:
    epsilon: float
    lower_m: int
    upper_m: int | None = None


def _check_eps(epsilon: float) -> None:
    if not 0.0 < epsilon < 1.0:
        raise InputError("epsilon must lie in (0, 1)")


def m_rec_upper(N: int, epsilon: float) -> int:
    """``ceil(N ln N - N ln eps)`` samples see every neighborhood w.p. >= 1 - eps."""
    if N < 1:
        raise InputError("N must be >= 1")
    _check_eps(epsilon)
    return math.ceil(N * math.log(N) - N * math.log(epsilon))


def _log_terms(sizes: np.ndarray, N: int) -> np.ndarray:
    frac = 1.0 - np.asarray(sizes, dtype=float) / N
    with np.errstate(divide="ignore"):
        return np.log(np.clip(frac, 0.0, None))


def second_moment_ratio(M: int, log_single: np.ndarray, log_pair: np.ndarray) -> float:
    """``(sum_i a_i^M)^2 / sum_ij b_ij^M`` with ``a, b`` given as logs.

    ``0^0`` counts as one; a vanishing denominator gives ratio zero.
    """
    if M == 0:
        return 1.0
    with np.errstate(invalid="ignore"):
        num = 2.0 * logsumexp(M * log_single)
        den = logsumexp(M * log_pair)
    if not np.isfinite(den):
        return 0.0
    return float(np.exp(num - den))


def m_rec_lower_general(
    sizes: Sequence[int],
    pair_union_sizes: np.ndarray | Callable[[int, int], int],
    N: int,
    epsilon: float,
) -> int:
    """Largest ``M`` whose second-moment ratio is still at least ``epsilon``.

    ``pair_union_sizes`` is an ``N x N`` array (or a callable ``(i, j)``)
    holding ``|N(v_i) | N(v_j)|``; the diagonal is the size itself.

    The ratio is bounded by ``sum_i a_i^M <= N a_max^M``, which gives a cutoff
    past which it stays below ``epsilon``. The ratio is not monotone in
    general, so when the work fits in ``SCAN_WORK`` every ``M`` below the
    cutoff is checked from the top down. Larger inputs bracket by doubling
    and bisect, which is exact whenever the ratio is non-increasing.
    """
    _check_eps(epsilon)
    sizes = np.asarray(sizes, dtype=float)
    if sizes.size != N:
        raise InputError("need one size per vertex")
    if callable(pair_union_sizes):
        union = np.array([[pair_union_sizes(i, j) for j in range(N)] for i in range(N)], dtype=float)
    else:
        union = np.asarray(pair_union_sizes, dtype=float)
    if np.any(sizes >= N):
        return 0
    log_single = _log_terms(sizes, N)
    log_pair = _log_terms(union.ravel(), N)
    ratio = lambda m: second_moment_ratio(m, log_single, log_pair)  # noqa: E731
    cutoff = math.ceil(math.log(N / epsilon) / -float(log_single.max())) + 1
    if cutoff * N * N <= SCAN_WORK:
        for m in range(cutoff, -1, -1):
            if ratio(m) >= epsilon:
                return m
        return 0
    lo, hi = 0, 1
    while hi < cutoff and ratio(hi) >= epsilon:
        lo, hi = hi, hi * 2
    hi = min(hi, cutoff)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ratio(mid) >= epsilon:
            lo = mid
        else:
            hi = mid
    return lo


def neighborhood_overlaps(g: LabeledGraph, r: int) -> tuple[np.ndarray, np.ndarray]:
    """Ball sizes and the matrix of pairwise union sizes at radius ``r``."""
    n = g.num_vertices
    rows, cols = [], []
    for v in range(n):
        members = ball(g, v, r)
        rows.extend([v] * len(members))
        cols.extend(members)
    mat = csr_matrix((np.ones(len(rows), dtype=np.int32), (rows, cols)), shape=(n, n))
    inter = (mat @ mat.T).toarray()
    sizes = np.diag(inter).astype(np.int64)
    union = sizes[:, None] + sizes[None, :] - inter
    return sizes, union


def m_rec_lower_lattice(N: int, r: int, d: int, epsilon: float) -> int:
    """Floor of the lattice lower bound, neighborhoods taken to have ``r**d`` sites.

    A non-positive value means the bound says nothing.
    """
    _check_eps(epsilon)
    if r < 1 or d < 1 or N < 1:
        raise InputError("need r, d, N >= 1")
    if r**d >= N:
        raise InputError("need r**d < N")
    num = math.log(1.0 / epsilon - 1.0) - math.log((2 * r - 1) ** d / N)
    den = -math.log1p(-(r**d) / N)
    return math.floor(num / den)


def coverage_times(N: int, trials: int, seed) -> np.ndarray:
    """Per trial, the number of uniform draws until every one of ``N`` items appeared."""
    if N < 1 or trials < 1:
        raise InputError("need N >= 1 and trials >= 1")
    rng = as_rng(seed)
    chunk = max(16, math.ceil(N * (math.log(N) + 3)))
    out = np.empty(trials, dtype=np.int64)
    for t in range(trials):
        seen = np.full(N, -1, dtype=np.int64)
        drawn = 0
        while True:
            block = rng.integers(0, N, size=chunk)
            vals, first = np.unique(block, return_index=True)
            fresh = seen[vals] < 0
            seen[vals[fresh]] = drawn + first[fresh]
            drawn += chunk
            if seen.min() >= 0:
                break
        out[t] = seen.max() + 1
    return out


@dataclass(frozen=True)
class SamplingResult:
    successes: int
    trials: int
    overlap_unique: bool | None

    @property
    def fraction(self) -> float:
        return self.successes / self.trials if self.trials else float("nan")


def simulate_sampling(
    g: LabeledGraph | int,
    r: int,
    M: int,
    trials: int,
    seed,
    full: bool = False,
    check_uniqueness: bool = True,
) -> SamplingResult:
    """Fraction of trials in which ``M`` draws with replacement reconstruct.

    By default success means every vertex's neighborhood was drawn at least
    once; this is decided from :func:`coverage_times`, so one seed gives
    results that are monotone in ``M``. ``full=True`` instead rebuilds from
    the distinct drawn neighborhoods and compares with ``g`` up to
    isomorphism (slow).
    ``g`` may be a bare vertex count when only coverage matters.
    """
    if M < 0 or trials < 1:
        raise InputError("need M >= 0 and trials >= 1")
    if full and not isinstance(g, LabeledGraph):
        raise InputError("full reconstruction needs a graph")
    rng = as_rng(seed)
    N = g if isinstance(g, int) else g.num_vertices
    unique = None
    if check_uniqueness and isinstance(g, LabeledGraph) and r >= 1:
        unique = check_overlap_uniqueness(shatter(g, r - 1, mode=ROOTED))
    if not full:
        wins = int(np.sum(coverage_times(N, trials, rng) <= M))
        return SamplingResult(wins, trials, unique)
    entries = [extract_neighborhood(g, v, r) for v in range(N)]
    wins = 0
    for _ in range(trials):
        if M == 0:
            continue
        draws = np.unique(rng.integers(0, N, size=M))
        ms = NeighborhoodMultiset(r, ROOTED, entries=[entries[i] for i in draws.tolist()], q=g.q)
        try:
            wins += int(are_isomorphic(reconstruct(ms), g))
        except ReconstructionError:
            pass
    return SamplingResult(wins, trials, unique)
