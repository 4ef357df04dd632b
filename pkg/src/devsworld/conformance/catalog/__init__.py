from __future__ import annotations

from ..core import Rule
from . import abp, barbershop, iobs, seird

_CATALOGS = {
    "abp": abp.rules,
    "seird": seird.rules,
    "barbershop": barbershop.rules,
    "iobs": iobs.rules,
}


def rule_catalog(scenario: str) -> tuple[list[Rule], list[Rule]]:
    """Built-in ``(component_rules, system_rules)`` for a scenario."""
    try:
        factory = _CATALOGS[scenario]
    except KeyError:
        raise LookupError(f"no rule catalog for scenario {scenario!r}") from None
    return factory()


__all__ = ["rule_catalog"]
