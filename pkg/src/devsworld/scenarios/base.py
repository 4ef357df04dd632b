from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass
from typing import IO, Any, Callable, Sequence

from ..kernel import Coordinator, Coupled
from ..trace import JsonlSink, ListSink, TraceRecord


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


@dataclass
class Scenario:
    """Binds a config dataclass, a model builder and a command-line contract.

    Every dataclass field becomes a ``--field`` flag whose default is the
    field default; ``help`` comes from the field metadata.
    """

    name: str
    config_cls: type
    build: Callable[[Any], Coupled]
    horizon: Callable[[Any], float]
    description: str = ""
    exogenous: Callable[[Any, IO[str] | None], list] | None = None

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        for f in dataclasses.fields(self.config_cls):
            kind = f.metadata.get("type", f.type if isinstance(f.type, type) else None)
            if kind is None:
                kind = {"int": int, "float": float, "str": str}.get(str(f.type), str)
            parser.add_argument(
                f"--{f.name}",
                type=kind,
                default=f.default,
                help=f"{f.metadata.get('help', '')} (default: {f.default})",
            )

    def config_from_namespace(self, ns: argparse.Namespace):
        values = {f.name: getattr(ns, f.name) for f in dataclasses.fields(self.config_cls)}
        cfg = self.config_cls(**values)
        cfg.validate()
        return cfg

    def parse_args(self, argv: Sequence[str]):
        """Config from flags; raises ConfigError on unknown or invalid flags."""
        parser = _Parser(prog=self.name, add_help=False)
        self.add_arguments(parser)
        return self.config_from_namespace(parser.parse_args(list(argv)))

    def defaults(self):
        cfg = self.config_cls()
        cfg.validate()
        return cfg

    def run(self, cfg, sink, stdin: IO[str] | None = None) -> None:
        root = self.build(cfg)
        events = self.exogenous(cfg, stdin) if self.exogenous else []
        coord = Coordinator(root, sink=sink)
        coord.run_until(self.horizon(cfg), events)

    def simulate(self, cfg, stdin: IO[str] | None = None) -> list[TraceRecord]:
        sink = ListSink()
        self.run(cfg, sink, stdin)
        return sink.records

    def simulate_to(self, cfg, stream: IO[str], stdin: IO[str] | None = None) -> int:
        sink = JsonlSink(stream)
        try:
            self.run(cfg, sink, stdin)
        finally:
            sink.flush()
        return sink.count


def read_arrivals(path: str | None, stdin: IO[str] | None) -> list[dict]:
    """Arrival schedule: one JSON object with a numeric ``time`` per line.

    ``path`` of ``"-"`` reads the given stdin stream (or ``sys.stdin``).
    """
    if not path:
        return []
    if path == "-":
        stream = stdin if stdin is not None else sys.stdin
        lines = stream.read().splitlines()
    else:
        try:
            with open(path, encoding="utf-8") as fh:
                lines = fh.read().splitlines()
        except OSError as exc:
            raise ConfigError(f"cannot read arrivals file: {exc}") from exc
    out = []
    for n, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except ValueError as exc:
            raise ConfigError(f"arrivals line {n}: {exc}") from exc
        if not isinstance(obj, dict) or isinstance(obj.get("time"), bool) or not isinstance(obj.get("time"), (int, float)):
            raise ConfigError(f"arrivals line {n}: expected an object with a numeric 'time'")
        if obj["time"] < 0:
            raise ConfigError(f"arrivals line {n}: negative time")
        out.append(obj)
    prev = None
    for n, obj in enumerate(out, start=1):
        if prev is not None and obj["time"] < prev:
            raise ConfigError(f"arrivals must be sorted by time (entry {n})")
        prev = obj["time"]
    return out
