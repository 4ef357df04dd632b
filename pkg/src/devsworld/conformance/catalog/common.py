from __future__ import annotations

from ...trace import check_monotonic
from ..core import SYSTEM, Finding, Rule


def close(a: float, b: float) -> bool:
    return abs(a - b) <= 1e-9 * max(1.0, abs(a), abs(b))


def select(records, entity=None, event=None):
    """``(index, record)`` pairs filtered by entity and/or event."""
    return [(i, r) for i, r in enumerate(records)
            if (entity is None or r.entity == entity) and (event is None or r.event == event)]


INT = "int"
NUM = "number"
BOOL = "bool"
STR = "str"


def _matches(value, spec) -> bool:
    if isinstance(spec, (set, frozenset, tuple)):
        return any(type(value) is type(opt) and value == opt for opt in spec)
    if spec == INT:
        return isinstance(value, int) and not isinstance(value, bool)
    if spec == NUM:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if spec == BOOL:
        return isinstance(value, bool)
    if spec == STR:
        return isinstance(value, str)
    raise ValueError(f"unknown value spec {spec!r}")


def catalog_rule(rule_id: str, catalog: dict, level: str = SYSTEM) -> Rule:
    """Every record is a known (entity, event) with exactly the listed payload keys."""

    def check(records, cfg):
        for i, r in enumerate(records):
            spec = catalog.get((r.entity, r.event))
            if spec is None:
                yield Finding(i, f"unknown event {r.entity}/{r.event}")
                continue
            if set(r.payload) != set(spec):
                yield Finding(i, f"{r.entity}/{r.event} payload keys {sorted(r.payload)} != {sorted(spec)}")
                continue
            for key, vspec in spec.items():
                if not _matches(r.payload[key], vspec):
                    yield Finding(i, f"{r.entity}/{r.event} payload {key}={r.payload[key]!r} has wrong type")
                    break

    return Rule(rule_id, level, "events and payload shapes follow the contract", check)


def monotonic_rule(rule_id: str) -> Rule:
    def check(records, cfg):
        for i in check_monotonic(list(records)):
            yield Finding(i, f"time {records[i].time} goes backwards from {records[i - 1].time}")

    return Rule(rule_id, SYSTEM, "timestamps never decrease", check)


def horizon_rule(rule_id: str, horizon_of) -> Rule:
    def check(records, cfg):
        h = horizon_of(cfg)
        for i, r in enumerate(records):
            if r.time > h and not close(r.time, h):
                yield Finding(i, f"event at {r.time} after horizon {h}")

    return Rule(rule_id, SYSTEM, "no events after the simulation horizon", check)
