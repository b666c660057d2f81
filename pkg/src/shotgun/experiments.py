"""Seeded Monte Carlo harness: sweeps, expectation checks, sampling tables.

Every trial ``t`` at every grid point draws its instance from
``Seed(master, t)``; trials are farmed out to worker processes and reduced in
(grid point, trial) order, so output bytes depend only on the config.
Wall-clock time is reported separately and never enters those bytes.
"""

from __future__ import annotations

import configparser
import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .blocking import (
    count_er_blocking,
    count_lattice_blocking,
    count_tree_blocking,
    detect_labeled_er_blocking,
    expected_er_blocking,
    expected_lattice_blocking,
    expected_tree_blocking,
    tree_blocking_bound,
)
from .canon import DEFAULT_BUDGET
from .generators import LabelDistribution, Seed, gen_binary_tree, gen_er, gen_jigsaw, gen_labeled_er, gen_lattice
from .graph import InputError
from .identifiability import InternalContradiction, Status, judge, threshold_predictions
from .jigsaw import (
    AssemblyError,
    all_slots_distinct,
    assemble,
    compare_assembly,
    detect_jigsaw_blocking,
    expected_jigsaw_blocking,
    shatter_puzzle,
    verify_jigsaw_witness,
)
from .sampling import m_rec_lower_general, m_rec_lower_lattice, m_rec_upper, neighborhood_overlaps, simulate_sampling

MODELS = ("lattice", "er", "labeled_er", "tree", "jigsaw")
AXES = {"lattice": ("r", "q", "n"), "er": ("r", "lam", "p", "N"), "labeled_er": ("r", "lam", "p", "q", "N"),
        "tree": ("q", "levels"), "jigsaw": ("q", "n")}
REQUIRED = {"lattice": ({"n", "q"},), "er": ({"N", "p"}, {"N", "lam"}),
            "labeled_er": ({"N", "p", "q"}, {"N", "lam", "q"}), "tree": ({"levels", "q"},), "jigsaw": ({"n", "q"},)}
INT_PARAMS = {"n", "d", "q", "r", "N", "levels", "trials", "seed", "threads", "budget_iso"}
Z95 = 1.959963984540054


class ConfigError(InputError):
    pass


@dataclass
class ExperimentConfig:
    model: str
    params: dict
    axis: str | None = None
    grid: list = field(default_factory=list)
    trials: int = 100
    seed: int = 0
    threads: int = 1
    budget_iso: int = DEFAULT_BUDGET
    detectors: list[str] | None = None
    epsilon: float = 0.1
    literal: bool = False
    verbose: bool = False

    def validate(self) -> None:
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.axis is not None:
            if self.axis not in AXES[self.model] and not (self.axis == "M" and self.model != "jigsaw"):
                raise ConfigError(f"axis {self.axis!r} not valid for model {self.model}")
            if not self.grid:
                raise ConfigError("grid must be nonempty")
        probe = self.point(self.grid[0] if self.grid else None)
        if self.model in REQUIRED and not any(need <= probe.keys() for need in REQUIRED[self.model]):
            raise ConfigError(f"model {self.model} needs parameters {sorted(REQUIRED[self.model][0])}")

    def point(self, value) -> dict:
        params = dict(self.params)
        if self.axis is not None:
            params[self.axis] = value
        return params

    def to_dict(self) -> dict:
        out = asdict(self)
        out.pop("threads")
        out.pop("verbose")
        return out


def _coerce(key: str, value: str):
    if key in INT_PARAMS:
        return int(value)
    try:
        return int(value)
    except ValueError:
        return float(value)


def load_config(text: str) -> ExperimentConfig:
    """Parse an INI config with ``[experiment]`` and ``[model]`` sections."""
    cp = configparser.ConfigParser()
    cp.optionxform = str  # keep N distinct from n
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    if "experiment" not in cp:
        raise ConfigError("missing [experiment] section")
    ex = cp["experiment"]
    try:
        model = ex["model"].strip()
        params = {k: _coerce(k, v) for k, v in cp["model"].items()} if "model" in cp else {}
        axis = ex.get("axis", "").strip() or None
        grid = [_coerce(axis or "", x) for x in ex.get("grid", "").replace(",", " ").split()]
        if "seed" not in ex:
            raise ConfigError("seed is required")
        cfg = ExperimentConfig(
            model=model,
            params=params,
            axis=axis,
            grid=grid,
            trials=int(ex.get("trials", "100")),
            seed=int(ex["seed"]),
            threads=int(ex.get("threads", "1")),
            budget_iso=int(ex.get("budget_iso", str(DEFAULT_BUDGET))),
            detectors=[d.strip() for d in ex["detectors"].split(",")] if "detectors" in ex else None,
            epsilon=float(ex.get("epsilon", "0.1")),
            literal=ex.getboolean("literal", fallback=False),
        )
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc}") from exc
    if cfg.axis is not None and not cfg.grid:
        cfg.grid = auto_grid(cfg)
    cfg.validate()
    return cfg


def auto_grid(cfg: ExperimentConfig) -> list:
    """Grid centred on the predicted transition, padded by half its width."""
    p = cfg.params
    if cfg.model == "lattice" and cfg.axis == "r":
        pred = threshold_predictions("lattice", n=p["n"], d=p["d"], q=p["q"])
        lo, hi = pred["r_low"], pred["r_high"]
        pad = max(1, math.ceil(0.5 * (hi - lo)))
        return list(range(max(1, lo - pad), hi + pad + 1))
    if cfg.model == "jigsaw" and cfg.axis == "q":
        pred = threshold_predictions("jigsaw", n=p["n"])
        lo, hi = pred["q_blocking"], pred["q_assembly"]
        pts = np.geomspace(max(2.0, 0.5 * lo), 1.5 * hi, 6)
        return sorted({int(round(x)) for x in pts})
    if cfg.model == "tree" and cfg.axis == "q":
        t = threshold_predictions("tree", levels=p["levels"])["q_threshold"]
        return sorted({max(1, int(round(t * f))) for f in (0.5, 0.75, 1.0, 1.25, 1.5)})
    if cfg.model in ("er", "labeled_er") and cfg.axis == "r":
        lam = p.get("lam", p.get("p", 0) * p["N"])
        pred = threshold_predictions(cfg.model, N=p["N"], lam=lam)
        hi = pred.get("r_high", math.ceil(2 * pred["r_low"]))
        lo = max(1, math.floor(pred["r_low"]))
        return list(range(lo, max(lo, hi) + 1))
    raise ConfigError("cannot place a grid automatically for this axis; give one")


# ---------------------------------------------------------------------------
# instances and per-trial work


def _edge_p(params: dict) -> float:
    if "p" in params:
        return float(params["p"])
    return float(params["lam"]) / params["N"]


def make_instance(model: str, params: dict, seed: Seed):
    if model in REQUIRED and not any(need <= params.keys() for need in REQUIRED[model]):
        missing = sorted(REQUIRED[model][0] - params.keys())
        raise ConfigError(f"model {model} needs parameters {missing}")
    if model == "lattice":
        return gen_lattice(params["n"], params.get("d", 2), LabelDistribution.uniform(params["q"]), seed)
    if model == "er":
        return gen_er(params["N"], _edge_p(params), seed)
    if model == "labeled_er":
        return gen_labeled_er(params["N"], _edge_p(params), LabelDistribution.uniform(params["q"]), seed)
    if model == "tree":
        return gen_binary_tree(params["levels"], params["q"], seed)
    if model == "jigsaw":
        return gen_jigsaw(params["n"], params["q"], seed)
    raise ConfigError(f"unknown model {model!r}")


def blocking_count(model: str, inst, params: dict) -> float:
    if model == "lattice":
        return count_lattice_blocking(inst, params["r"])
    if model == "er":
        return count_er_blocking(inst, params["r"])
    if model == "labeled_er":
        return len(detect_labeled_er_blocking(inst, params["r"]))
    if model == "tree":
        return count_tree_blocking(inst)
    if model == "jigsaw":
        return detect_jigsaw_blocking(inst)[0]
    raise ConfigError(model)


def analytic_expectation(model: str, params: dict, literal: bool = False) -> float | None:
    if model == "lattice":
        return expected_lattice_blocking(params["n"], params.get("d", 2), params["r"], params["q"])
    if model == "er":
        return expected_er_blocking(params["N"], params["r"], _edge_p(params), literal=literal)
    if model == "tree":
        return expected_tree_blocking(params["levels"], params["q"])
    if model == "jigsaw":
        return expected_jigsaw_blocking(params["n"], params["q"])
    return None


@dataclass
class TrialOutcome:
    status: str
    reason: str
    blocking: float
    budget_exhausted: bool = False
    assembly: str = ""


def _judge_jigsaw(puzzle, params: dict, seed: Seed) -> TrialOutcome:
    count, witnesses = detect_jigsaw_blocking(puzzle, limit=8)
    witness = next((w for w in witnesses if verify_jigsaw_witness(puzzle, w)), None)
    yes = all_slots_distinct(puzzle)
    if yes and witness is not None:
        raise InternalContradiction("distinct slot colors yet a blocking exchange")
    try:
        result = compare_assembly(assemble(shatter_puzzle(puzzle, seed), puzzle.n), puzzle).value
    except AssemblyError as exc:
        result = type(exc).__name__
    if witness is not None:
        status, reason = Status.NON_IDENTIFIABLE, "JigsawAligned"
    elif yes:
        status, reason = Status.IDENTIFIABLE, "slots-distinct"
    else:
        status, reason = Status.UNDETERMINED, "no-certificate"
    return TrialOutcome(status.value, reason, count, False, result)


def run_trial(task: tuple) -> TrialOutcome:
    model, params, master, t, budget, detectors = task
    seed = Seed(master, t)
    inst = make_instance(model, params, seed)
    if model == "jigsaw":
        return _judge_jigsaw(inst, params, Seed(master, t + (1 << 32)))
    verdict = judge(inst, params.get("r", 1), set(detectors) if detectors else None, budget)
    exhausted = verdict.status is Status.UNDETERMINED and "exceeded" in verdict.reason
    return TrialOutcome(verdict.status.value, verdict.reason, blocking_count(model, inst, params), exhausted)


def count_trial(task: tuple) -> float:
    model, params, master, t = task
    return blocking_count(model, make_instance(model, params, Seed(master, t)), params)


def parallel_map(fn: Callable, tasks: list, threads: int) -> list:
    """Ordered map; the reduce order never depends on scheduling."""
    if threads <= 1 or len(tasks) <= 1:
        return [fn(x) for x in tasks]
    chunk = max(1, len(tasks) // (threads * 8))
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks, chunksize=chunk))


# ---------------------------------------------------------------------------
# statistics


def wilson_interval(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    if trials == 0:
        return (0.0, 1.0)
    p = successes / trials
    denom = 1 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == trials else min(1.0, center + half)
    return (lo, hi)


def mean_se(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    if arr.size < 2:
        return float(arr.mean()) if arr.size else float("nan"), float("nan")
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(arr.size))


def fmt(x) -> str:
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return f"{x:.10g}"
    return str(x)


# ---------------------------------------------------------------------------
# sweeps


STATUSES = [s.value for s in Status]


@dataclass
class SweepResult:
    axis: str | None
    rows: list[dict]
    trials: dict
    wall_time: float = 0.0

    def to_csv(self) -> str:
        return _csv(self.rows)

    def to_json(self, cfg: ExperimentConfig, verbose: bool = False) -> str:
        doc = {"config": cfg.to_dict(), "rows": self.rows}
        if verbose:
            doc["trials"] = self.trials
        return json.dumps(doc, indent=1, sort_keys=True, default=fmt) + "\n"

    def plot_data(self) -> str:
        return _plot(self.rows)


def _csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    keys = list(rows[0])
    writer.writerow(keys)
    for row in rows:
        writer.writerow([fmt(row[k]) for k in keys])
    return buf.getvalue()


def _plot(rows: list[dict]) -> str:
    if not rows:
        return ""
    keys = [k for k in rows[0] if isinstance(rows[0][k], (int, float))]
    lines = ["# " + " ".join(keys)]
    lines += [" ".join(fmt(row[k]) for k in keys) for row in rows]
    return "\n".join(lines) + "\n"


def run_sweep(cfg: ExperimentConfig, threads: int | None = None) -> SweepResult:
    cfg.validate()
    start = time.perf_counter()
    points = cfg.grid if cfg.axis is not None else [None]
    tasks = []
    for value in points:
        params = cfg.point(value)
        tasks += [(cfg.model, params, cfg.seed, t, cfg.budget_iso, cfg.detectors) for t in range(cfg.trials)]
    outcomes = parallel_map(run_trial, tasks, threads or cfg.threads)
    rows, per_trial = [], {}
    for k, value in enumerate(points):
        chunk = outcomes[k * cfg.trials: (k + 1) * cfg.trials]
        params = cfg.point(value)
        counts = {s: sum(o.status == s for o in chunk) for s in STATUSES}
        assert sum(counts.values()) == cfg.trials
        mean, se = mean_se([o.blocking for o in chunk])
        row = {"axis_value": value if value is not None else "", "trials": cfg.trials}
        for s in STATUSES:
            lo, hi = wilson_interval(counts[s], cfg.trials)
            row[s] = counts[s]
            row[f"{s}_lo"] = lo
            row[f"{s}_hi"] = hi
        row["blocking_mean"] = mean
        row["blocking_se"] = se
        exp = analytic_expectation(cfg.model, params, cfg.literal) if "r" in params or cfg.model in ("jigsaw", "tree") else None
        row["blocking_expected"] = exp if exp is not None else float("nan")
        row["budget_exhausted"] = sum(o.budget_exhausted for o in chunk)
        if cfg.model == "jigsaw":
            for name in ("Exact", "RotationEquivalent", "Different", "NoSpanningCluster", "AmbiguousCorner", "Stalled"):
                row[name] = sum(o.assembly == name for o in chunk)
        if cfg.model in ("er", "labeled_er") and abs(_edge_p(params) * params["N"] - 1.0) < 1e-12:
            row["note"] = "theory open at lambda = 1"
        rows.append(row)
        per_trial[fmt(value) if value is not None else "-"] = [asdict(o) for o in chunk]
    return SweepResult(cfg.axis, rows, per_trial, time.perf_counter() - start)


# ---------------------------------------------------------------------------
# expectation check


def run_expectation_check(cfg: ExperimentConfig, threads: int | None = None) -> list[dict]:
    """Empirical mean blocking count against the closed form at each grid point.

    ``z`` uses the sample standard error; when every trial returns the same
    count that error is zero, and the Poisson null ``sqrt(E / trials)`` is
    used instead (flagged in ``se_source``). The tree row also reports the
    closed-form upper bound and whether the mean clears ``bound + 3 SE``.
    """
    cfg.validate()
    points = cfg.grid if cfg.axis is not None else [None]
    rows = []
    for value in points:
        params = cfg.point(value)
        tasks = [(cfg.model, params, cfg.seed, t) for t in range(cfg.trials)]
        counts = parallel_map(count_trial, tasks, threads or cfg.threads)
        mean, se = mean_se(counts)
        analytic = analytic_expectation(cfg.model, params, cfg.literal)
        if analytic is None:
            raise ConfigError(f"no closed form for model {cfg.model}")
        source = "sample"
        if not se > 0:
            se = math.sqrt(analytic / cfg.trials) if analytic > 0 else 0.0
            source = "poisson-null"
        z = (mean - analytic) / se if se > 0 else (0.0 if mean == analytic else math.inf)
        row = {"axis_value": value if value is not None else "", "trials": cfg.trials, "analytic": analytic,
               "empirical": mean, "se": se, "z": z, "se_source": source}
        if cfg.model == "tree":
            bound = tree_blocking_bound(params["levels"], params["q"])
            row["bound"] = bound
            row["pass"] = mean <= bound + 3 * se
        else:
            row["pass"] = abs(z) <= 3
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# sampling


def run_sampling_experiment(cfg: ExperimentConfig, threads: int | None = None) -> list[dict]:
    """Coverage success against ``M`` with the upper and lower bounds alongside.

    The grid axis is ``M``; without a grid the rows span from the general
    lower bound to the upper bound.
    """
    if cfg.model not in ("lattice", "er", "labeled_er", "tree"):
        raise ConfigError("sampling experiments need a graph model")
    params = dict(cfg.params)
    r = params.get("r", 1)
    g = make_instance(cfg.model, params, Seed(cfg.seed, 0))
    N = g.num_vertices
    eps = cfg.epsilon
    upper = m_rec_upper(N, eps)
    sizes, union = neighborhood_overlaps(g, r)
    lower = m_rec_lower_general(sizes, union, N, eps)
    lattice_lower = None
    if cfg.model == "lattice" and params.get("d", 2) >= 1:
        try:
            lattice_lower = m_rec_lower_lattice(N, r, params.get("d", 2), eps)
        except InputError:
            lattice_lower = None
    grid = cfg.grid if cfg.axis == "M" and cfg.grid else sorted({0, lower, (lower + upper) // 2, upper})
    rows = []
    for k, M in enumerate(grid):
        res = simulate_sampling(g, r, int(M), cfg.trials, Seed(cfg.seed, 1), check_uniqueness=(k == 0))
        lo, hi = wilson_interval(res.successes, res.trials)
        rows.append({
            "M": int(M), "trials": res.trials, "successes": res.successes, "success": res.fraction,
            "success_lo": lo, "success_hi": hi, "upper_m": upper, "lower_m": lower,
            "lattice_lower_m": lattice_lower if lattice_lower is not None else "",
        })
    return rows


def write_outputs(out: str | Path, table_csv: str, provenance: str, plot: str | None, timing: dict) -> None:
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.with_suffix(".csv").write_text(table_csv)
    out.with_suffix(".json").write_text(provenance)
    if plot is not None:
        out.with_suffix(".dat").write_text(plot)
    out.with_suffix(".timing.json").write_text(json.dumps(timing, indent=1, sort_keys=True) + "\n")
