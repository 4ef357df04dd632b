from .catalog import rule_catalog
from .core import (
    COMPONENT,
    SYSTEM,
    CaseResult,
    ConfigurationError,
    Diagnostic,
    Finding,
    Rule,
    Scores,
    aggregate,
    conformance,
    cross_scenario_total,
    mean,
    score_case,
)
