from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .builder import Assembly, construct, write_outputs
from .planner import DEFAULT_ATTEMPTS, PipelineError, Session, plan
from .schemas import PlanNode


@dataclass
class GenerationResult:
    tree: PlanNode
    assembly: Assembly
    calls: int


def generate(spec_text: str, contract_text: str, client, out_dir: str | Path | None = None,
             root_name: str = "System", workers: int = 4, max_attempts: int = DEFAULT_ATTEMPTS) -> GenerationResult:
    """Plan, build and (optionally) write a simulator from a specification and its contract.

    On failure, whatever was already produced is written to ``out_dir``
    before the error propagates.
    """
    session = Session(client, max_attempts, workers)
    tree = None
    try:
        tree = plan(spec_text, contract_text, session, root_name)
        assembly = construct(tree, session)
    except PipelineError as exc:
        if out_dir is not None:
            write_outputs(out_dir, tree, Assembly(exc.partial) if exc.partial else None)
        raise
    if out_dir is not None:
        write_outputs(out_dir, tree, assembly)
    return GenerationResult(tree, assembly, len(session.calls))
