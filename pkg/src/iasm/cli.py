"""Command-line interface.

Subcommands: ``parse`` (syntax and static checks), ``run`` (execute steps
against an environment), ``check`` (property-test the semantic laws),
``bounds`` (work bound and exploration witness), ``synth`` (synthesize a
program from an oracle and verify equivalence), and ``serve`` (the live
session server).

Exit codes: 0 success; 1 parse/validation/usage errors; 2 a run ended in
failure; 3 a run stalled waiting for the environment.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .analysis import CheckConfig, bound_rule, check_lemmas, witness_rule
from .engine import RandomEnvironment, ScriptedEnvironment, StepVerdict, run
from .model import AsmError, Structure, canonical_json
from .syntax import (
    Diagnostic,
    ParseError,
    desugar_program,
    parse_program,
    pretty_program,
    validate,
)


def _emit(obj) -> None:
    sys.stdout.write(canonical_json(obj) + "\n")


def _load_program(path: str):
    text = Path(path).read_text()
    program = parse_program(text)
    diags = validate(program)
    return text, program, diags


def cmd_parse(args) -> int:
    try:
        _text, program, diags = _load_program(args.file)
    except ParseError as exc:
        _emit([Diagnostic("error", "SyntaxError", exc.message, exc.line, exc.col).to_json()])
        return 1
    _emit([d.to_json() for d in diags])
    if args.emit_ast:
        sys.stdout.write(pretty_program(program))
    return 0 if not diags else 1


def cmd_run(args) -> int:
    try:
        _text, program, diags = _load_program(args.file)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 1
    if diags:
        print(f"invalid program: {diags[0].message}", file=sys.stderr)
        return 1
    program = desugar_program(program)
    state = Structure.from_json(
        json.loads(Path(args.state).read_text()), program.vocabulary
    )
    if args.serve:
        from .server import serve

        serve(port=args.port, preload=(Path(args.file).read_text(), state))
        return 0
    if args.env is not None:
        env = ScriptedEnvironment.from_json(json.loads(Path(args.env).read_text()))
    elif args.random is not None:
        universe = None
        if args.universe:
            universe = json.loads(Path(args.universe).read_text())
        env = RandomEnvironment(args.random, universe)
    else:
        print("choose one of --env, --random, --serve", file=sys.stderr)
        return 1
    try:
        results = run(program, state, env, args.steps)
    except AsmError as exc:
        print(f"run error: {exc}", file=sys.stderr)
        return 1
    _emit([r.to_json() for r in results])
    last = results[-1].verdict
    return {StepVerdict.SUCCESS: 0, StepVerdict.FAIL: 2, StepVerdict.STALLED: 3}[last]


def cmd_check(args) -> int:
    try:
        _text, program, diags = _load_program(args.file)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 1
    if diags:
        print(f"invalid program: {diags[0].message}", file=sys.stderr)
        return 1
    universe = None
    if args.universe:
        universe = json.loads(Path(args.universe).read_text())
    config = CheckConfig(
        seed=args.seed, cases=args.cases, max_len=args.max_len, reply_universe=universe
    )
    report = check_lemmas(program, config)
    _emit(report.to_json())
    print(report.summary(), file=sys.stderr)
    return 0 if report.ok else 1


def cmd_bounds(args) -> int:
    try:
        _text, program, diags = _load_program(args.file)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 1
    if diags:
        print(f"invalid program: {diags[0].message}", file=sys.stderr)
        return 1
    core = desugar_program(program)
    out = {
        "B": bound_rule(core.rule),
        "W": witness_rule(core.rule, core.external).pretty(),
    }
    if args.cond_max:
        out["B_max_variant"] = bound_rule(core.rule, cond_max=True)
    _emit(out)
    return 0


def cmd_synth(args) -> int:
    from .synthesis import (
        BUILTIN_ORACLES,
        SynthesisError,
        TableOracle,
        check_equivalence,
        synthesize,
    )

    if args.builtin:
        oracle = BUILTIN_ORACLES[args.builtin]()
    else:
        if not args.oracle:
            print("give an oracle JSON file or --builtin NAME", file=sys.stderr)
            return 1
        oracle = TableOracle.from_json(json.loads(Path(args.oracle).read_text()))
    try:
        program = synthesize(oracle, cap=args.cap)
        report = check_equivalence(oracle, program, cap=args.cap)
    except SynthesisError as exc:
        print(f"synthesis error: {exc}", file=sys.stderr)
        return 1
    text = pretty_program(program)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    _emit(report.to_json())
    return 0 if report.ok else 1


def cmd_serve(args) -> int:
    from .server import serve

    serve(port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="iasm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse and validate a program file")
    p.add_argument("file")
    p.add_argument("--emit-ast", action="store_true", help="print the canonical form")
    p.set_defaults(fn=cmd_parse)

    p = sub.add_parser("run", help="run steps against an environment")
    p.add_argument("file")
    p.add_argument("--state", required=True, help="initial state JSON")
    p.add_argument("--env", help="scripted environment JSON (list of rounds)")
    p.add_argument("--random", type=int, help="seeded random environment")
    p.add_argument("--universe", help="reply universe JSON for --random")
    p.add_argument("--serve", action="store_true", help="serve this program as a session")
    p.add_argument("--steps", type=int, default=1)
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("check", help="property-test the semantic laws")
    p.add_argument("file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cases", type=int, default=100)
    p.add_argument("--max-len", type=int, default=3)
    p.add_argument("--universe", help="JSON array of reply elements")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("bounds", help="work bound and exploration witness")
    p.add_argument("file")
    p.add_argument("--cond-max", action="store_true", help="also report the max-variant bound")
    p.set_defaults(fn=cmd_bounds)

    p = sub.add_parser("synth", help="synthesize a program from an oracle")
    p.add_argument("oracle", nargs="?", help="oracle JSON file")
    p.add_argument("--builtin", choices=["constant-update", "immediate-fail", "one-query-then-update", "broker"])
    p.add_argument("--out", help="write the synthesized program here")
    p.add_argument("--cap", type=int, default=200_000, help="explosion cap on pairs/terms")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("serve", help="start the session server")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (AsmError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
