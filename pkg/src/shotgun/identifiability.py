"""One-sided identifiability verdicts, diameters, and threshold predictions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import brentq
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from .blocking import (
    BlockingWitness,
    detect_er_blocking,
    detect_general_blocking,
    detect_labeled_er_blocking,
    detect_lattice_blocking,
    detect_tree_blocking,
    verify_blocking_switch,
)
from .canon import DEFAULT_BUDGET, BudgetExceeded
from .graph import BinaryTree, InputError, LabeledGraph, Lattice, box_windows, rows_distinct
from .neighborhoods import check_overlap_uniqueness, shatter

LAMBDA_TOL = 1e-12
DIAMETER_CHUNK = 256
GENERAL_DETECTOR_MAX_VERTICES = 64


class Status(str, Enum):
    IDENTIFIABLE = "IdentifiableCertified"
    NON_IDENTIFIABLE = "NonIdentifiableCertified"
    UNDETERMINED = "Undetermined"


class InternalContradiction(AssertionError):
    """Both certificates fired on one instance; signals a bug."""


@dataclass(frozen=True)
class Verdict:
    status: Status
    witness: BlockingWitness | None = None
    reason: str = ""

    def to_record(self) -> str:
        line = f"verdict {self.status.value} {self.reason or '-'}"
        if self.witness is not None:
            line += "\n" + self.witness.to_record()
        return line


def adjacency_matrix(g: LabeledGraph) -> csr_matrix:
    rows = [u for u, nb in enumerate(g.adj) for _ in nb]
    cols = [v for nb in g.adj for v in nb]
    n = g.num_vertices
    return csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n, n))


def max_component_diameter(g: LabeledGraph) -> int:
    """Largest eccentricity over all vertices, by BFS from every vertex.

    Sources are processed in chunks through scipy's unweighted shortest
    paths so memory stays at ``chunk x N``.
    """
    n = g.num_vertices
    if n == 0:
        return 0
    if g.num_edges == 0:
        return 0
    mat = adjacency_matrix(g)
    best = 0
    for start in range(0, n, DIAMETER_CHUNK):
        idx = np.arange(start, min(n, start + DIAMETER_CHUNK))
        dist = shortest_path(mat, method="D", unweighted=True, directed=False, indices=idx)
        finite = dist[np.isfinite(dist)]
        if finite.size:
            best = max(best, int(finite.max()))
    return best


def component_count(g: LabeledGraph) -> int:
    return int(connected_components(adjacency_matrix(g), directed=False)[0])


def solve_lambda_star(lam: float) -> float:
    """The root ``x`` in (0, 1) of ``x e^-x = lam e^-lam`` for ``lam > 1``."""
    if not lam > 1.0:
        raise InputError("need lambda > 1")
    target = lam * math.exp(-lam)
    f = lambda x: x * math.exp(-x) - target  # noqa: E731
    return brentq(f, 0.0, 1.0, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=500)


def lattice_strips_distinct(arr: np.ndarray, r: int) -> bool:
    """Every strip with side ``r-1`` along one axis and ``r`` along the others
    is unique within its axis. Then chaining boxes by strips is forced."""
    if r < 2:
        return arr.size == 1
    d = arr.ndim
    for axis in range(d):
        shape = [r] * d
        shape[axis] = r - 1
        if not rows_distinct(box_windows(arr, shape)):
            return False
    return True


def threshold_predictions(model: str, **params) -> dict:
    """Boundary values of ``r`` (or ``q``) where theory places the transition."""
    if model == "lattice":
        n, d, q = params["n"], params["d"], params["q"]
        ratio = math.log(n) / math.log(q)
        low = (d / 2 ** (d - 1) * ratio) ** (1 / d)
        high = (2 * d * ratio) ** (1 / d)
        return {"r_low": math.floor(low + 1e-12), "r_high": math.ceil(high - 1e-12)}
    if model in ("er", "labeled_er"):
        N, lam = params["N"], params["lam"]
        log_n = math.log(N)
        out = {"r_low": log_n / (2 * (lam - math.log(lam)))}
        if lam < 1:
            out["r_high"] = math.ceil(log_n / math.log(1 / lam) - 1e-12)
        elif lam > 1:
            star = solve_lambda_star(lam)
            out["r_high"] = math.ceil(log_n * (1 / math.log(lam) + 2 / math.log(1 / star)) - 1e-12)
        else:
            out["note"] = "theory open at lambda = 1"
        return out
    if model == "jigsaw":
        n = params["n"]
        return {"q_blocking": n ** (2 / 3), "q_assembly": float(n**2)}
    if model == "tree":
        return {"q_threshold": 2.0 ** params["levels"]}
    raise InputError(f"unknown model {model!r}")


def default_detectors(g: LabeledGraph) -> set[str]:
    if isinstance(g.geometry, Lattice):
        return {"lattice"}
    if isinstance(g.geometry, BinaryTree):
        return {"tree"}
    out = {"er"} if g.q == 1 else {"labeled_er"}
    if g.num_vertices <= GENERAL_DETECTOR_MAX_VERTICES:
        out.add("general")
    return out


@dataclass
class _Finder:
    g: LabeledGraph
    r: int
    budget: int
    undetermined: list[str] = field(default_factory=list)

    def first_verified(self, candidates) -> BlockingWitness | None:
        for w in candidates:
            check = verify_blocking_switch(self.g, w, self.r, self.budget)
            if check.ok:
                return w
            if check.undetermined:
                self.undetermined.append(check.reason)
        return None


def _identifiable_reason(g: LabeledGraph, r: int, budget: int) -> str | None:
    if isinstance(g.geometry, Lattice):
        arr = g.label_array()
        if r >= 2 and check_overlap_uniqueness(shatter(g, r - 1)):
            return "overlap-unique"
        if lattice_strips_distinct(arr, r):
            return "strips-unique"
        return None
    if r >= 1 and check_overlap_uniqueness(shatter(g, r - 1), budget):
        return "overlap-unique"
    if r >= max_component_diameter(g):
        return "radius-covers-components"
    return None


def judge(
    g: LabeledGraph, r: int, detectors: set[str] | None = None, budget: int = DEFAULT_BUDGET, scan: int = 64
) -> Verdict:
    """Certify identifiability, certify its failure, or report neither.

    ``scan`` caps how many candidate witnesses each detector offers for
    verification. Raises :class:`InternalContradiction` if both sides fire.
    """
    if r < 0:
        raise InputError("radius must be non-negative")
    notes: list[str] = []
    try:
        yes = _identifiable_reason(g, r, budget)
    except BudgetExceeded as exc:
        yes = None
        notes.append(f"uniqueness: {exc}")
    finder = _Finder(g, r, budget)
    witness = None
    for name in sorted(detectors if detectors is not None else default_detectors(g)):
        try:
            if name == "lattice":
                if 2 * r - 1 <= g.geometry.n and r >= 1:
                    witness = finder.first_verified(detect_lattice_blocking(g, r, limit=scan))
            elif name == "tree":
                if r == 1:
                    witness = finder.first_verified(detect_tree_blocking(g, limit=scan))
            elif name == "er":
                if r >= 1:
                    witness = finder.first_verified(detect_er_blocking(g, r)[:scan])
            elif name == "labeled_er":
                if r >= 1:
                    witness = finder.first_verified(detect_labeled_er_blocking(g, r)[:scan])
            elif name == "general":
                if r >= 1:
                    found, complete = detect_general_blocking(g, r, budget, limit=1)
                    if not complete:
                        notes.append("general detector incomplete")
                    witness = finder.first_verified(found)
            else:
                raise InputError(f"unknown detector {name!r}")
        except BudgetExceeded as exc:
            notes.append(f"{name}: {exc}")
        if witness is not None:
            break
    notes.extend(finder.undetermined)
    if yes is not None and witness is not None:
        raise InternalContradiction(f"{yes} and witness {witness} on the same instance")
    if yes is not None:
        return Verdict(Status.IDENTIFIABLE, reason=yes)
    if witness is not None:
        return Verdict(Status.NON_IDENTIFIABLE, witness, reason=witness.kind.value)
    return Verdict(Status.UNDETERMINED, reason="; ".join(notes) or "no-certificate")
