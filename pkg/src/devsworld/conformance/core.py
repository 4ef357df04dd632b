from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

from ..trace import TraceRecord

COMPONENT = "component"
SYSTEM = "system"


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class Finding:
    """One violation reported by a rule check."""

    index: int | None
    message: str
    entities: tuple[str, ...] = ()


@dataclass(frozen=True)
class Diagnostic:
    rule_id: str
    index: int | None
    entities: frozenset[str]
    message: str

    def to_dict(self) -> dict:
        return {"rule": self.rule_id, "index": self.index, "entities": sorted(self.entities), "message": self.message}


@dataclass(frozen=True)
class Rule:
    id: str
    level: str
    description: str
    check: Callable[[Sequence[TraceRecord], Any], Iterable[Finding]]

    def __post_init__(self):
        if self.level not in (COMPONENT, SYSTEM):
            raise ValueError(f"rule level must be component or system, got {self.level!r}")

    def evaluate(self, records: Sequence[TraceRecord], config: Any) -> Diagnostic | None:
        """Run the check; ``None`` when it passes, else the first finding.

        A check that crashes on a malformed trace counts as a failure.
        """
        try:
            findings = list(self.check(records, config))
        except (KeyError, TypeError, ValueError, IndexError, AttributeError) as exc:
            return Diagnostic(self.id, None, frozenset(), f"rule could not be evaluated: {type(exc).__name__}: {exc}")
        if not findings:
            return None
        first = findings[0]
        index = first.index if first.index is not None and 0 <= first.index < len(records) else None
        entities = set(first.entities)
        if index is not None:
            entities.add(records[index].entity)
        msg = first.message
        if len(findings) > 1:
            msg += f" (+{len(findings) - 1} more)"
        return Diagnostic(self.id, index, frozenset(entities), msg)


@dataclass
class CaseResult:
    case_id: str
    v: int
    c: float
    component_outcomes: dict[str, bool] = field(default_factory=dict)
    system_outcomes: dict[str, bool] = field(default_factory=dict)
    diagnostics: list[Diagnostic] = field(default_factory=list)
    exit_status: int | None = None
    timed_out: bool = False
    record_count: int = 0
    errors: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "id": self.case_id,
            "v": self.v,
            "c": self.c,
            "exit_status": self.exit_status,
            "timed_out": self.timed_out,
            "record_count": self.record_count,
            "component": dict(self.component_outcomes),
            "system": dict(self.system_outcomes),
            "diagnostics": [d.to_dict() for d in self.diagnostics],
            "errors": list(self.errors),
        }


@dataclass
class Scores:
    scenario: str
    oss: float
    bcs: float
    cases: list[CaseResult]

    def to_dict(self) -> dict:
        return {"scenario": self.scenario, "oss": self.oss, "bcs": self.bcs, "cases": [c.to_dict() for c in self.cases]}


def conformance(v: int, comp_passed: int, comp_total: int, sys_passed: int, sys_total: int) -> float:
    """Validity-gated mean of component and system pass rates."""
    if comp_total <= 0 or sys_total <= 0:
        raise ConfigurationError("both rule sets must be non-empty")
    if v not in (0, 1):
        raise ValueError("v must be 0 or 1")
    return 0.5 * v * (comp_passed / comp_total + sys_passed / sys_total)


def score_case(
    records: Sequence[TraceRecord],
    rules_comp: Sequence[Rule],
    rules_sys: Sequence[Rule],
    v: int,
    config: Any = None,
    case_id: str = "",
) -> CaseResult:
    if not rules_comp or not rules_sys:
        raise ConfigurationError("both rule sets must be non-empty")
    comp: dict[str, bool] = {}
    sys_: dict[str, bool] = {}
    diagnostics: list[Diagnostic] = []
    for rules, outcomes in ((rules_comp, comp), (rules_sys, sys_)):
        for rule in rules:
            diag = rule.evaluate(records, config)
            outcomes[rule.id] = diag is None
            if diag is not None:
                diagnostics.append(diag)
    c = conformance(v, sum(comp.values()), len(comp), sum(sys_.values()), len(sys_))
    return CaseResult(case_id, v, c, comp, sys_, diagnostics, record_count=len(records))


def mean(values: Sequence[float]) -> float:
    if not values:
        raise ConfigurationError("cannot average an empty suite")
    return sum(values) / len(values)


def aggregate(results: Sequence[CaseResult], scenario: str = "") -> Scores:
    return Scores(scenario, mean([r.v for r in results]), mean([r.c for r in results]), list(results))


def cross_scenario_total(scores: Iterable[Scores]) -> dict[str, float]:
    """Sum of per-scenario means, for tables that report totals across scenarios."""
    scores = list(scores)
    return {"oss": sum(s.oss for s in scores), "bcs": sum(s.bcs for s in scores)}
