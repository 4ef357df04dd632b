"""Run a simulator executable over a suite of cases and score its traces.

Suite files are JSON::

    {"version": 1, "scenario": "abp",
     "cases": [{"id": "smoke", "args": [["--total_packets", "1"]], "stdin": "", "timeout": 30}]}

``args`` is an ordered list of ``[flag, value]`` pairs appended to the
simulator command; ``stdin`` is fed to the child verbatim.
"""
from __future__ import annotations

import json
import subprocess
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

from ..scenarios import get_scenario
from ..scenarios.base import ConfigError
from ..trace import parse_text
from .catalog import rule_catalog
from .core import CaseResult, ConfigurationError, Diagnostic, Scores, aggregate, score_case

SUITE_VERSION = 1
REPORT_VERSION = 1
OUTPUT_CAP = 64 * 1024 * 1024
_CHUNK = 1 << 16


@dataclass(frozen=True)
class TestCase:
    __test__ = False  # not a pytest class

    id: str
    cli_args: tuple[tuple[str, str], ...] = ()
    stdin_payload: bytes = b""
    wall_timeout: float = 60.0

    def __post_init__(self):
        if not self.id:
            raise ConfigurationError("case id must be non-empty")
        if not self.wall_timeout > 0:
            raise ConfigurationError(f"case {self.id}: wall_timeout must be > 0")
        for flag, _ in self.cli_args:
            if not isinstance(flag, str) or not flag:
                raise ConfigurationError(f"case {self.id}: flags must be non-empty strings")

    def argv(self) -> list[str]:
        out: list[str] = []
        for flag, value in self.cli_args:
            out += [flag, str(value)]
        return out

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "args": [[f, v] for f, v in self.cli_args],
            "stdin": self.stdin_payload.decode("utf-8"),
            "timeout": self.wall_timeout,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "TestCase":
        try:
            args = tuple((str(f), str(v)) for f, v in obj.get("args", []))
            return cls(str(obj["id"]), args, obj.get("stdin", "").encode("utf-8"), float(obj.get("timeout", 60.0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"bad case entry {obj!r}: {exc}") from exc


@dataclass
class Suite:
    scenario: str
    cases: list[TestCase] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"version": SUITE_VERSION, "scenario": self.scenario, "cases": [c.to_dict() for c in self.cases]}


def load_suite(path: str | Path) -> Suite:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ConfigurationError(f"cannot read suite {path}: {exc}") from exc
    return suite_from_dict(obj)


def suite_from_dict(obj) -> Suite:
    if not isinstance(obj, dict) or obj.get("version") != SUITE_VERSION:
        raise ConfigurationError(f"suite must be an object with version {SUITE_VERSION}")
    cases = [TestCase.from_dict(c) for c in obj.get("cases", [])]
    ids = [c.id for c in cases]
    if len(set(ids)) != len(ids):
        raise ConfigurationError("case ids must be unique")
    return Suite(str(obj.get("scenario", "")), cases)


def save_suite(suite: Suite, path: str | Path) -> None:
    Path(path).write_text(json.dumps(suite.to_dict(), indent=2) + "\n", encoding="utf-8")


def bundled_suite(scenario: str) -> Suite:
    """The smoke/nominal/heavy suite shipped for a reference scenario."""
    res = resources.files("devsworld.conformance").joinpath("suites", f"{scenario}.json")
    if not res.is_file():
        raise LookupError(f"no bundled suite for scenario {scenario!r}")
    return suite_from_dict(json.loads(res.read_text(encoding="utf-8")))


@dataclass
class RunOutcome:
    exit_status: int | None
    stdout: bytes
    stderr: bytes
    timed_out: bool = False
    overflow: bool = False
    spawn_error: str | None = None
    seconds: float = 0.0


def _drain(stream, sink: bytearray, cap: int, overflow: threading.Event, proc) -> None:
    while True:
        chunk = stream.read(_CHUNK)
        if not chunk:
            break
        room = cap - len(sink)
        if len(chunk) > room:
            sink.extend(chunk[:max(room, 0)])
            overflow.set()
            proc.kill()
            break
        sink.extend(chunk)
    stream.close()


def _feed(stream, payload: bytes) -> None:
    try:
        if payload:
            stream.write(payload)
    except (BrokenPipeError, OSError):
        pass
    finally:
        try:
            stream.close()
        except OSError:
            pass


def run_process(cmd: Sequence[str], case: TestCase, cap: int = OUTPUT_CAP) -> RunOutcome:
    """Launch ``cmd + case args`` with a wall-clock limit and an output cap."""
    argv = list(cmd) + case.argv()
    start = time.monotonic()
    try:
        proc = subprocess.Popen(argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, stderr=subprocess.PIPE)
    except OSError as exc:
        return RunOutcome(None, b"", b"", spawn_error=str(exc))
    out, err = bytearray(), bytearray()
    overflow = threading.Event()
    threads = [
        threading.Thread(target=_drain, args=(proc.stdout, out, cap, overflow, proc), daemon=True),
        threading.Thread(target=_drain, args=(proc.stderr, err, cap, threading.Event(), proc), daemon=True),
        threading.Thread(target=_feed, args=(proc.stdin, case.stdin_payload), daemon=True),
    ]
    for t in threads:
        t.start()
    timed_out = False
    try:
        proc.wait(timeout=case.wall_timeout)
    except subprocess.TimeoutExpired:
        timed_out = True
        proc.kill()
        proc.wait()
    for t in threads:
        t.join(timeout=5)
    return RunOutcome(proc.returncode, bytes(out), bytes(err), timed_out, overflow.is_set(),
                      seconds=time.monotonic() - start)


def run_case(cmd: Sequence[str], case: TestCase) -> tuple[int | None, bytes, int]:
    """``(exit status, raw stdout, v)`` for one case."""
    outcome = run_process(cmd, case)
    return outcome.exit_status, outcome.stdout, _validity(outcome)[0]


def _validity(outcome: RunOutcome):
    records, report = parse_text(outcome.stdout)
    ok = (outcome.spawn_error is None and outcome.exit_status == 0 and not outcome.timed_out
          and not outcome.overflow and report.valid)
    return int(ok), records, report


def _case_config(scenario: str, case: TestCase):
    try:
        return get_scenario(scenario).parse_args(case.argv())
    except ConfigError as exc:
        raise ConfigurationError(f"case {case.id}: arguments do not fit scenario {scenario}: {exc}") from exc


def evaluate_case(cmd: Sequence[str], case: TestCase, scenario: str) -> CaseResult:
    cfg = _case_config(scenario, case)
    comp, sys_ = rule_catalog(scenario)
    outcome = run_process(cmd, case)
    v, records, report = _validity(outcome)
    result = score_case(records, comp, sys_, v, cfg, case.id)
    result.exit_status = outcome.exit_status
    result.timed_out = outcome.timed_out
    errors = []
    if outcome.spawn_error is not None:
        errors.append(f"spawn-failure: {outcome.spawn_error}")
        result.diagnostics.insert(0, Diagnostic("spawn-failure", None, frozenset(), outcome.spawn_error))
    if outcome.timed_out:
        errors.append(f"timeout after {case.wall_timeout}s")
    if outcome.overflow:
        errors.append(f"stdout exceeded {OUTPUT_CAP} bytes")
    if outcome.exit_status not in (0, None):
        tail = outcome.stderr.decode("utf-8", "replace").strip().splitlines()[-3:]
        errors.append(f"exit status {outcome.exit_status}" + (f": {' | '.join(tail)}" if tail else ""))
    errors += [f"line {e.line}: {e.kind}: {e.message}" for e in report.line_errors[:20]]
    result.errors = errors
    return result


def evaluate_suite(cmd: Sequence[str], suite: Suite | Sequence[TestCase], scenario: str | None = None,
                   workers: int = 1) -> Scores:
    """Run every case (optionally in parallel) and aggregate OSS and BCS."""
    cases = list(suite.cases if isinstance(suite, Suite) else suite)
    scenario = scenario or (suite.scenario if isinstance(suite, Suite) else None)
    if not cases:
        raise ConfigurationError("suite has no cases")
    if not scenario:
        raise ConfigurationError("no scenario given for rule selection")
    rule_catalog(scenario)
    for case in cases:
        _case_config(scenario, case)
    if workers <= 1:
        results = [evaluate_case(cmd, c, scenario) for c in cases]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda c: evaluate_case(cmd, c, scenario), cases))
    results.sort(key=lambda r: r.case_id)
    return aggregate(results, scenario)


def report_dict(scores: Scores, command: Sequence[str] = ()) -> dict:
    return {"version": REPORT_VERSION, "command": list(command), **scores.to_dict()}


def summary_text(scores: Scores) -> str:
    lines = [f"scenario {scores.scenario}: OSS {scores.oss:.4f}  BCS {scores.bcs:.4f}  ({len(scores.cases)} cases)"]
    for case in scores.cases:
        failed = [k for k, ok in {**case.component_outcomes, **case.system_outcomes}.items() if not ok]
        status = "ok" if case.v and not failed else ("invalid" if not case.v else "rule failures")
        lines.append(f"  {case.case_id}: v={case.v} c={case.c:.4f} records={case.record_count} {status}")
        for err in case.errors[:3]:
            lines.append(f"    ! {err}")
        for d in case.diagnostics:
            where = f" @record {d.index}" if d.index is not None else ""
            lines.append(f"    - {d.rule_id}{where}: {d.message}")
    return "\n".join(lines)
