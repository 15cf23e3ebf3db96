"""Command-line driver: verify annotated programs, run the simulation
oracle, and pretty-print sources.

Exit codes: 0 when every condition is proved (or the subcommand has
nothing to prove), 1 when any condition is unproved / timed out / errored
(or a simulation found a postcondition violation), 2 on usage, parse, or
generation errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path
from typing import Sequence

from . import backend, sim
from .parser import ParseError, parse, print_file
from .vcgen import GENERATION_ERRORS, VC, bind_solvers, generate, vc_to_record

JSON_SCHEMA_VERSION = 1


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 2


def _load(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _table(rows: list[list[str]], header: list[str]) -> str:
    widths = [max(len(r[i]) for r in [header, *rows]) for i in range(len(header))]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip(),
        "  ".join("-" * w for w in widths),
    ]
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    return "\n".join(lines)


def _summary(results: Sequence[backend.CheckResult]) -> str:
    parts = [f"{len(results)} VCs"]
    proved = sum(1 for r in results if r.status == "Proved")
    parts.append(f"{proved} proved")
    for status, noun in (
        ("Unproved", "unproved"),
        ("Timeout", "timed out"),
        ("SolverError", "solver errors"),
    ):
        n = sum(1 for r in results if r.status == status)
        if n:
            parts.append(f"{n} {noun}")
    return ", ".join(parts)


def _cmd_verify(args: argparse.Namespace) -> int:
    try:
        source = _load(args.file)
    except OSError as e:
        return _fail(str(e))
    try:
        file = parse(source)
        vcs, warnings = bind_solvers(file, generate(file))
    except (ParseError, *GENERATION_ERRORS) as e:
        return _fail(str(e))
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    if args.solver:
        vcs = [dataclasses.replace(v, solver=args.solver) for v in vcs]

    if args.vcs_only:
        if args.json:
            payload = {"schema": JSON_SCHEMA_VERSION, "vcs": [vc_to_record(v) for v in vcs]}
            print(json.dumps(payload, indent=2))
        else:
            rows = [
                [v.id, v.origin.text, v.label.render() or "_", v.solver, v.formula_text]
                for v in vcs
            ]
            print(_table(rows, ["id", "origin", "label", "solver", "formula"]))
            print(f"\n{len(vcs)} VCs")
        return 0

    cfg = backend.config_for(vcs[0].solver if vcs else "z3", timeout_ms=args.timeout)
    results = backend.check_all(vcs, cfg, parallelism=args.jobs)
    if args.json:
        records = [
            vc_to_record(v) | backend.result_record(r) for v, r in zip(vcs, results)
        ]
        payload = {
            "schema": JSON_SCHEMA_VERSION,
            "vcs": records,
            "summary": {
                status: sum(1 for r in results if r.status == status)
                for status in ("Proved", "Unproved", "Timeout", "SolverError")
            },
        }
        print(json.dumps(payload, indent=2))
    else:
        rows = [
            [
                v.id,
                v.origin.text,
                v.label.render() or "_",
                v.solver,
                r.status,
                str(r.time_ms),
            ]
            for v, r in zip(vcs, results)
        ]
        print(_table(rows, ["id", "origin", "label", "solver", "result", "ms"]))
        print(f"\n{_summary(results)}")
        for v, r in zip(vcs, results):
            if r.status == "Unproved" and r.model is not None:
                assignment = ", ".join(f"{k} = {v_}" for k, v_ in sorted(r.model.items()))
                print(f"counterexample for {v.id}: {assignment}")
            elif r.status in ("SolverError", "Timeout") and r.detail:
                print(f"{v.id}: {r.detail}")
    return 0 if all(r.status == "Proved" for r in results) else 1


def _cmd_simulate(args: argparse.Namespace) -> int:
    try:
        source = _load(args.file)
    except OSError as e:
        return _fail(str(e))
    try:
        file = parse(source)
    except ParseError as e:
        return _fail(str(e))
    report = sim.simulate_runs(file, runs=args.runs, seed=args.seed)
    print(
        f"{report.runs} runs: {report.completed} completed, "
        f"{report.nonterminating} nonterminating, {report.unsampled} unsampled, "
        f"{len(report.violations)} postcondition violations"
    )
    for v in report.violations[:10]:
        state = ", ".join(f"{k} = {float(x):.6g}" for k, x in sorted(v.final.items()))
        print(f"violation (seed {v.seed}): {v.formula_text} fails at {state}")
    return 0 if report.ok else 1


def _cmd_fmt(args: argparse.Namespace) -> int:
    try:
        source = _load(args.file)
    except OSError as e:
        return _fail(str(e))
    try:
        file = parse(source)
    except ParseError as e:
        return _fail(str(e))
    print(print_file(file), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hhlverify",
        description="Verify annotated hybrid programs against their assertions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_verify = sub.add_parser("verify", help="generate and discharge verification conditions")
    p_verify.add_argument("file", help="annotated program (.hhl)")
    p_verify.add_argument("--json", action="store_true", help="machine-readable output")
    p_verify.add_argument("--timeout", type=int, default=backend.DEFAULT_TIMEOUT_MS, metavar="MS", help="per-condition solver timeout in milliseconds")
    p_verify.add_argument("--jobs", type=int, default=4, metavar="N", help="parallel solver processes")
    p_verify.add_argument("--vcs-only", action="store_true", help="print conditions without solving")
    p_verify.add_argument("--solver", metavar="NAME", help="override the solver for every condition")
    p_verify.set_defaults(func=_cmd_verify)

    p_sim = sub.add_parser("simulate", help="run the randomized simulation oracle")
    p_sim.add_argument("file", help="annotated program (.hhl)")
    p_sim.add_argument("--runs", type=int, default=100, metavar="N", help="number of seeded runs")
    p_sim.add_argument("--seed", type=int, default=0, metavar="K", help="base random seed")
    p_sim.set_defaults(func=_cmd_simulate)

    p_fmt = sub.add_parser("fmt", help="pretty-print a program")
    p_fmt.add_argument("file", help="annotated program (.hhl)")
    p_fmt.set_defaults(func=_cmd_fmt)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
