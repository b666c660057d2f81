"""Command line entry point: ``shotgun <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .canon import DEFAULT_BUDGET
from .experiments import (
    ConfigError,
    ExperimentConfig,
    load_config,
    make_instance,
    run_expectation_check,
    run_sampling_experiment,
    run_sweep,
    write_outputs,
    _csv,
    _plot,
)
from .generators import Seed
from .graph import InputError
from .identifiability import judge
from .io import graph_to_text, read_graph, write_graph
from .jigsaw import AssemblyError, Puzzle, assemble, compare_assembly, shatter_puzzle
from .neighborhoods import ReconstructionError, check_overlap_uniqueness, reconstruct, shatter

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BUDGET = 3

log = logging.getLogger("shotgun")


def _parse_kv(items: list[str]) -> dict:
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k] = int(v)
        except ValueError:
            out[k] = float(v)
    return out


def _load(args) -> ExperimentConfig:
    cfg = load_config(Path(args.config).read_text())
    if args.seed is not None:
        cfg.seed = args.seed
    if args.trials is not None:
        cfg.trials = args.trials
    if args.threads is not None:
        cfg.threads = args.threads
    if args.budget_iso is not None:
        cfg.budget_iso = args.budget_iso
    cfg.validate()
    return cfg


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_generate(args) -> int:
    params = _parse_kv(args.param)
    inst = make_instance(args.model, params, Seed(args.seed, args.stream))
    text = inst.to_text() if isinstance(inst, Puzzle) else graph_to_text(inst)
    _emit(text, args.out)
    return EXIT_OK


def cmd_shatter(args) -> int:
    g = read_graph(args.graph)
    ms = shatter(g, args.r, mode=args.mode)
    lines = [f"# {len(ms)} {ms.mode} neighborhoods, radius {args.r}"]
    if ms.mode == "box":
        lines += [" ".join(map(str, row)) for row in ms.box_rows().tolist()]
    else:
        for code, n in sorted(ms.code_counts(args.budget_iso or DEFAULT_BUDGET).items()):
            lines.append(f"{n} {code.bytes.hex()}")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    g = read_graph(args.graph)
    try:
        h = reconstruct(shatter(g, args.r, mode=args.mode), args.budget_iso or DEFAULT_BUDGET)
    except ReconstructionError as exc:
        print(f"reconstruction failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if args.out:
        write_graph(h, args.out)
    else:
        sys.stdout.write(graph_to_text(h))
    return EXIT_OK


def cmd_detect(args) -> int:
    from .blocking import (
        detect_er_blocking,
        detect_general_blocking,
        detect_labeled_er_blocking,
        detect_lattice_blocking,
        detect_tree_blocking,
    )

    g = read_graph(args.graph)
    if args.kind == "lattice":
        found = detect_lattice_blocking(g, args.r, limit=args.limit)
    elif args.kind == "er":
        found = detect_er_blocking(g, args.r)
    elif args.kind == "labeled_er":
        found = detect_labeled_er_blocking(g, args.r)
    elif args.kind == "tree":
        found = detect_tree_blocking(g, limit=args.limit)
    else:
        found, _ = detect_general_blocking(g, args.r, args.budget_iso or DEFAULT_BUDGET, limit=args.limit)
    _emit("".join(w.to_record() + "\n" for w in found), args.out)
    return EXIT_OK


def cmd_judge(args) -> int:
    g = read_graph(args.graph)
    detectors = set(args.detectors.split(",")) if args.detectors else None
    verdict = judge(g, args.r, detectors, args.budget_iso or DEFAULT_BUDGET)
    if args.verbose and args.r >= 1:
        log.info("overlap uniqueness at radius %d: %s", args.r - 1, check_overlap_uniqueness(shatter(g, args.r - 1)))
    _emit(verdict.to_record() + "\n", args.out)
    return EXIT_OK


def _timing(wall: float) -> dict:
    return {"wall_time_s": round(wall, 3)}


def cmd_sweep(args) -> int:
    cfg = _load(args)
    result = run_sweep(cfg)
    if args.out:
        write_outputs(args.out, result.to_csv(), result.to_json(cfg, args.verbose),
                      result.plot_data() if args.plot_data else None, _timing(result.wall_time))
    else:
        sys.stdout.write(result.to_csv())
    exhausted = sum(r["budget_exhausted"] for r in result.rows)
    if exhausted == cfg.trials * len(result.rows):
        return EXIT_BUDGET
    return EXIT_OK


def _table(args, cfg, rows) -> int:
    if args.out:
        doc = json.dumps({"config": cfg.to_dict(), "rows": rows}, indent=1, sort_keys=True, default=str) + "\n"
        write_outputs(args.out, _csv(rows), doc, _plot(rows) if args.plot_data else None, {})
    else:
        sys.stdout.write(_csv(rows))
    return EXIT_OK


def cmd_expectation(args) -> int:
    cfg = _load(args)
    return _table(args, cfg, run_expectation_check(cfg))


def cmd_sampling(args) -> int:
    cfg = _load(args)
    return _table(args, cfg, run_sampling_experiment(cfg))


def cmd_jigsaw_solve(args) -> int:
    puzzle = Puzzle.from_text(Path(args.puzzle).read_text())
    pieces = shatter_puzzle(puzzle, Seed(args.seed, 0))
    try:
        a = assemble(pieces, puzzle.n)
        verdict = compare_assembly(a, puzzle).value
    except AssemblyError as exc:
        if exc.partial is None:
            print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
            return 1
        a, verdict = exc.partial, type(exc).__name__
    _emit(a.to_text(verdict), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shotgun", description="Shotgun assembly of labeled random graphs.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--budget-iso", type=int, default=None, help="isomorphism search node budget")
    common.add_argument("--verbose", action="store_true")
    runs = argparse.ArgumentParser(add_help=False, parents=[common])
    runs.add_argument("config", help="experiment INI file")
    runs.add_argument("--seed", type=int)
    runs.add_argument("--trials", type=int)
    runs.add_argument("--threads", type=int)
    runs.add_argument("--plot-data", action="store_true", help="also write gnuplot-ready columns")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="draw one random instance")
    p.add_argument("model", choices=["lattice", "er", "labeled_er", "tree", "jigsaw"])
    p.add_argument("param", nargs="*", help="model parameters as key=value (e.g. n=8 d=2 q=3)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stream", type=int, default=0)
    p.set_defaults(func=cmd_generate)

    for name, func, hlp in (("shatter", cmd_shatter, "list the neighborhood multiset"),
                            ("reconstruct", cmd_reconstruct, "rebuild a graph from its neighborhoods")):
        p = sub.add_parser(name, parents=[common], help=hlp)
        p.add_argument("graph")
        p.add_argument("-r", type=int, required=True)
        p.add_argument("--mode", choices=["rooted", "box"])
        p.set_defaults(func=func)

    p = sub.add_parser("detect", parents=[common], help="list blocking witnesses")
    p.add_argument("graph")
    p.add_argument("-r", type=int, default=1)
    p.add_argument("--kind", choices=["general", "lattice", "er", "labeled_er", "tree"], default="general")
    p.add_argument("--limit", type=int)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("judge", parents=[common], help="certify identifiability either way")
    p.add_argument("graph")
    p.add_argument("-r", type=int, required=True)
    p.add_argument("--detectors", help="comma separated detector names")
    p.set_defaults(func=cmd_judge)

    for name, func, hlp in (("sweep", cmd_sweep, "threshold sweep"),
                            ("expectation-check", cmd_expectation, "closed forms against Monte Carlo"),
                            ("sampling", cmd_sampling, "sample-count experiment")):
        p = sub.add_parser(name, parents=[runs], help=hlp)
        p.set_defaults(func=func)

    p = sub.add_parser("jigsaw", help="puzzle tools")
    jsub = p.add_subparsers(dest="jigsaw_command", required=True)
    s = jsub.add_parser("solve", parents=[common], help="shuffle and reassemble a puzzle file")
    s.add_argument("puzzle")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_jigsaw_solve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InputError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
