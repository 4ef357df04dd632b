"""Command-line entry points.

Exit status: 0 success, 1 check/evaluation/generation failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .conformance import ConfigurationError, rule_catalog, score_case
from .conformance.harness import bundled_suite, evaluate_suite, load_suite, report_dict, summary_text
from .kernel import DevsError
from .scenarios import SCENARIOS
from .scenarios.base import ConfigError
from .trace import SerializationError, parse_text

OK, FAILED, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _scenario_parsers(sub, command: str, help_text: str, with_trace: bool = False):
    p = sub.add_parser(command, help=help_text)
    kinds = p.add_subparsers(dest="scenario", metavar="SCENARIO", required=True)
    for name, sc in SCENARIOS.items():
        sp = kinds.add_parser(name, help=sc.description, description=sc.description)
        if with_trace:
            sp.add_argument("trace", help="JSONL trace file ('-' for stdin)")
        sc.add_arguments(sp)
        sp.set_defaults(scenario_parser=sp)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="devsworld", description="DEVS simulation, trace conformance and generation")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    _scenario_parsers(sub, "simulate", "run a reference scenario and print its JSONL trace")

    ev = sub.add_parser("evaluate", help="score a simulator command over a test suite")
    ev.add_argument("--scenario", required=True, help="rule catalog to apply")
    ev.add_argument("--suite", help="suite JSON file (default: the bundled suite of the scenario)")
    ev.add_argument("--report", help="write the JSON report here (default: stdout)")
    ev.add_argument("--workers", type=int, default=1, help="cases run in parallel")
    ev.add_argument("simulator", nargs=argparse.REMAINDER,
                    help="simulator command after '--' (default: the reference simulator)")

    _scenario_parsers(sub, "check-trace", "apply a scenario's rules to a trace file", with_trace=True)

    gen = sub.add_parser("generate", help="generate a simulator from a specification and an interface contract")
    gen.add_argument("--spec", required=True, help="natural-language specification file")
    gen.add_argument("--contract", required=True, help="interface contract file")
    gen.add_argument("--out", required=True, help="output directory")
    backend = gen.add_mutually_exclusive_group(required=True)
    backend.add_argument("--mock", help="scripted mock reply file")
    backend.add_argument("--endpoint", help="chat backend base URL (API key from DEVSWORLD_API_KEY)")
    gen.add_argument("--model", default="", help="model name for --endpoint")
    gen.add_argument("--record", help="save every exchange as a mock script")
    gen.add_argument("--root-name", default="System", help="class name of the root model")
    gen.add_argument("--workers", type=int, default=4, help="concurrent requests")
    gen.add_argument("--max-attempts", type=int, default=3, help="calls allowed per agent step")
    return parser


def _config(args):
    sc = SCENARIOS[args.scenario]
    try:
        return sc, sc.config_from_namespace(args)
    except (ConfigError, TypeError, ValueError) as exc:
        args.scenario_parser.error(str(exc))


def cmd_simulate(args) -> int:
    sc, cfg = _config(args)
    try:
        sc.simulate_to(cfg, sys.stdout, sys.stdin)
    except ConfigError as exc:
        _err(f"simulate: {exc}")
        return USAGE
    except (DevsError, SerializationError) as exc:
        _err(f"simulate: simulation failed: {exc}")
        return FAILED
    return OK


def cmd_evaluate(args) -> int:
    command = list(args.simulator)
    if command and command[0] == "--":
        command = command[1:]
    if not command:
        command = [sys.executable, "-m", "devsworld", "simulate", args.scenario]
    try:
        rule_catalog(args.scenario)
        suite = load_suite(args.suite) if args.suite else bundled_suite(args.scenario)
        scores = evaluate_suite(command, suite, args.scenario, workers=args.workers)
    except (ConfigurationError, LookupError) as exc:
        _err(f"evaluate: {exc}")
        return USAGE
    report = json.dumps(report_dict(scores, command), indent=2) + "\n"
    if args.report:
        Path(args.report).write_text(report, encoding="utf-8")
    else:
        sys.stdout.write(report)
    _err(summary_text(scores))
    return OK


def cmd_check_trace(args) -> int:
    sc, cfg = _config(args)
    try:
        data = sys.stdin.buffer.read() if args.trace == "-" else Path(args.trace).read_bytes()
    except OSError as exc:
        _err(f"check-trace: cannot read {args.trace}: {exc}")
        return USAGE
    records, report = parse_text(data)
    comp, sys_ = rule_catalog(args.scenario)
    result = score_case(records, comp, sys_, int(report.valid), cfg, case_id=str(args.trace))
    print(f"trace: {report.record_count} records, {'valid' if report.valid else 'INVALID'}")
    for e in report.line_errors[:20]:
        print(f"  line {e.line}: {e.kind}: {e.message}")
    diags = {d.rule_id: d for d in result.diagnostics}
    for level, outcomes in (("component", result.component_outcomes), ("system", result.system_outcomes)):
        for rule_id, ok in outcomes.items():
            line = f"{'PASS' if ok else 'FAIL'} [{level}] {rule_id}"
            if not ok:
                d = diags[rule_id]
                where = f" at record {d.index}" if d.index is not None else ""
                line += f"{where}: {d.message}"
            print(line)
    print(f"c = {result.c:.4f}")
    passed = report.valid and all(result.component_outcomes.values()) and all(result.system_outcomes.values())
    return OK if passed else FAILED


def cmd_generate(args) -> int:
    from .genpipe import ChatError, HttpChatClient, MockClient, PipelineError, RecordingClient, generate

    try:
        spec = Path(args.spec).read_text(encoding="utf-8")
        contract = Path(args.contract).read_text(encoding="utf-8")
    except OSError as exc:
        _err(f"generate: {exc}")
        return USAGE
    try:
        if args.mock:
            client = MockClient.from_file(args.mock)
        else:
            if not args.model:
                _err("generate: --model is required with --endpoint")
                return USAGE
            client = HttpChatClient(args.endpoint, args.model)
    except ChatError as exc:
        _err(f"generate: {exc}")
        return USAGE
    recorder = RecordingClient(client) if args.record else None
    try:
        result = generate(spec, contract, recorder or client, args.out, args.root_name,
                          workers=args.workers, max_attempts=args.max_attempts)
    except PipelineError as exc:
        _err(f"generate: failed at {exc.node_path}: {exc}")
        return FAILED
    except ValueError as exc:
        _err(f"generate: {exc}")
        return USAGE
    finally:
        if recorder is not None:
            recorder.save(args.record)
    _err(f"generate: {len(result.assembly.artifacts)} models and main.py written to {args.out} "
         f"({result.calls} requests)")
    return OK


COMMANDS = {
    "simulate": cmd_simulate,
    "evaluate": cmd_evaluate,
    "check-trace": cmd_check_trace,
    "generate": cmd_generate,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except BrokenPipeError:
        return FAILED


if __name__ == "__main__":
    sys.exit(main())
