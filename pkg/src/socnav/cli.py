"""Command-line front end: validate, compute, simulate, classify,
summarize, compare, import.

Conventions: diagnostics go to stderr, data goes to ``-o`` targets or
stdout; exit codes are 0 (ok), 1 (validation/data errors), 2 (usage),
3 (I/O). Multi-file subcommands process inputs in parallel (capped by
SOCNAV_THREADS, 0 = auto) and merge results in input order.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import ingest, report, scenarios, simulator
from .core import MetricParams
from .errors import SocnavError
from .metrics import compute_all

EXIT_OK = 0
EXIT_DATA = 1
EXIT_USAGE = 2
EXIT_IO = 3


def _thread_count() -> int:
    raw = os.environ.get("SOCNAV_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    return os.cpu_count() or 1 if n <= 0 else n


def _pmap(fn, items):
    """Parallel map preserving input order."""
    workers = min(_thread_count(), max(1, len(items)))
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _read(path: str) -> bytes:
    with open(path, "rb") as f:
        return f.read()


def _write(data: bytes, out: str | None):
    if out is None or out == "-":
        sys.stdout.buffer.write(data)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        with open(out, "wb") as f:
            f.write(data)


def _load_params(path: str | None) -> MetricParams:
    if path is None:
        return MetricParams()
    doc = json.loads(_read(path))
    return report.params_from_jsonable(doc)


def _cmd_validate(args) -> int:
    def check(path):
        return path, ingest.validate(_read(path))

    failed = False
    for path, issues in _pmap(check, args.files):
        for issue in issues:
            print(f"{path}: {issue}", file=sys.stderr)
            failed |= issue.severity == "error"
    return EXIT_DATA if failed else EXIT_OK


def _cmd_compute(args) -> int:
    params = _load_params(args.params)
    episode = ingest.parse_episode(_read(args.episode))
    result = compute_all(episode, params, dt=args.dt, include_stepwise=args.stepwise)
    _write(report.write_output(result), args.output)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    if args.scenario not in simulator.SCENARIO_NAMES:
        print(f"unknown scenario {args.scenario!r}; choose from "
              f"{', '.join(simulator.SCENARIO_NAMES)}", file=sys.stderr)
        return EXIT_USAGE
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)

    def one(i):
        config = simulator.generate_scenario(args.scenario, args.seed + i,
                                             robot_policy=args.robot_policy)
        config = dataclasses.replace(config,
                                     episode_id=f"{args.scenario}_{args.seed}_{i}")
        episode = simulator.run(config)
        path = outdir / f"{args.scenario}_{args.seed}_{i}.json"
        with open(path, "wb") as f:
            f.write(ingest.serialize_episode(episode))
        return path

    for path in _pmap(one, list(range(args.count))):
        print(f"wrote {path}", file=sys.stderr)
    return EXIT_OK


def _load_cards(directory: str | None):
    if directory is None:
        return None
    cards = {}
    for path in sorted(Path(directory).glob("*.json")):
        card = scenarios.parse_card(_read(str(path)))
        cards[card.name] = card
    if not cards:
        raise SocnavError(f"no card files found in {directory}")
    return cards


def _cmd_classify(args) -> int:
    cards = _load_cards(args.cards)

    def one(path):
        episode = ingest.parse_episode(_read(path))
        return episode.episode_id, scenarios.classify(episode, cards=cards)

    results = _pmap(one, args.episodes)
    labels_by_episode = {epid: labels for epid, labels in results}
    coverage = scenarios.coverage_report(labels_by_episode)
    doc = {
        "format_version": "1.0",
        "episodes": {
            epid: [
                {"scenario": l.scenario, "agent_ids": list(l.agent_ids),
                 "t_start": l.t_start, "t_end": l.t_end, "confidence": l.confidence}
                for l in labels
            ]
            for epid, labels in labels_by_episode.items()
        },
        "coverage": {
            "episode_count": coverage.episode_count,
            "scenario_counts": coverage.scenario_counts,
            "labeled_fraction": coverage.labeled_fraction,
            "unlabeled_fraction": coverage.unlabeled_fraction,
        },
    }
    _write(ingest.canonical_json_bytes(doc), args.output)
    return EXIT_OK


def _cmd_summarize(args) -> int:
    reports = _pmap(lambda path: report.parse_report(_read(path)), args.reports)
    summary = report.summarize(reports, bins=args.bins)
    _write(report.write_output(summary), args.output)
    return EXIT_OK


def _cmd_compare(args) -> int:
    summaries = {}
    for spec in args.label:
        name, sep, path = spec.partition("=")
        if not sep or not name or not path:
            print(f"--label expects NAME=SUMMARY_FILE, got {spec!r}", file=sys.stderr)
            return EXIT_USAGE
        summaries[name] = report.parse_summary(_read(path))
    comparison = report.compare(summaries)
    _write(report.write_output(comparison), args.output)
    return EXIT_OK


def _cmd_import(args) -> int:
    episode = ingest.import_tsv(_read(args.tsv), frame_rate=args.hz,
                                robot_id=args.robot)
    _write(ingest.serialize_episode(episode), args.output)
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="socnav",
        description="Social navigation episode metrics, scenarios and simulation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check episode files against the schema")
    p.add_argument("files", nargs="+")
    p.set_defaults(fn=_cmd_validate)

    p = sub.add_parser("compute", help="compute the metric suite for one episode")
    p.add_argument("episode")
    p.add_argument("--params", help="MetricParams JSON file")
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--stepwise", action="store_true")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(fn=_cmd_compute)

    p = sub.add_parser("simulate", help="generate scenario episodes")
    p.add_argument("--scenario", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--robot-policy", default="sfm",
                   choices=("sfm", "straight_line_stop"))
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("classify", help="label episodes with scenario detectors")
    p.add_argument("episodes", nargs="+")
    p.add_argument("--cards", help="directory of scenario card JSON files")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(fn=_cmd_classify)

    p = sub.add_parser("summarize", help="aggregate metric reports into a summary")
    p.add_argument("reports", nargs="+")
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(fn=_cmd_summarize)

    p = sub.add_parser("compare", help="compare corpus summaries side by side")
    p.add_argument("--label", action="append", required=True,
                   metavar="NAME=SUMMARY_FILE")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(fn=_cmd_compare)

    p = sub.add_parser("import", help="import a bird's-eye-view TSV trajectory table")
    p.add_argument("--tsv", required=True)
    p.add_argument("--hz", type=float, required=True)
    p.add_argument("--robot", default=None)
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(fn=_cmd_import)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0,) else 0
    try:
        return args.fn(args)
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except SocnavError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except json.JSONDecodeError as e:
        print(f"error: malformed JSON input: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
