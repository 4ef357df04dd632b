"""Reference scenario models and their command-line contracts."""
from __future__ import annotations

from . import abp, barbershop, iobs, seird
from .base import ConfigError, Scenario

SCENARIOS: dict[str, Scenario] = {
    s.name: s for s in (abp.SCENARIO, seird.SCENARIO, barbershop.SCENARIO, iobs.SCENARIO)
}


def get_scenario(name: str) -> Scenario:
    try:
        return SCENARIOS[name]
    except KeyError:
        raise LookupError(f"unknown scenario {name!r}; known: {', '.join(sorted(SCENARIOS))}") from None


__all__ = ["SCENARIOS", "ConfigError", "Scenario", "get_scenario"]
