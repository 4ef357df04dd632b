"""Recursive structural planning: classify, split, formulate."""
from __future__ import annotations

import re
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

from pydantic import BaseModel

from .client import ChatClient, ChatError
from .prompts import dump, feedback_block, parse_reply, render
from .schemas import (
    ClassifierReply,
    FormulatorReply,
    ModelSpecification,
    PlanNode,
    SplitterReply,
    is_identifier,
)

DEFAULT_ATTEMPTS = 3


class PipelineError(RuntimeError):
    """A node could not be planned or built; ``partial`` keeps whatever was produced."""

    def __init__(self, message: str, node_path: str, partial: dict | None = None):
        super().__init__(f"{node_path}: {message}")
        self.node_path = node_path
        self.partial = dict(partial or {})


@dataclass
class Session:
    """Client access shared by all agents of one run: retry bound, call limit, call log."""

    client: ChatClient
    max_attempts: int = DEFAULT_ATTEMPTS
    workers: int = 4
    calls: list[tuple[str, str]] = field(default_factory=list)

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        self._gate = threading.Semaphore(max(1, self.workers))
        self._lock = threading.Lock()

    def send(self, role: str, prompt: str, path: str, schema: dict | None = None) -> str:
        with self._gate:
            with self._lock:
                self.calls.append((path, role))
            try:
                return self.client.complete(role, prompt, schema)
            except ChatError as exc:
                raise PipelineError(f"{role} request failed: {exc}", path) from exc

    def ask(self, role: str, build: Callable[[str], str], path: str, parse: Callable[[str], object],
            schema: dict | None = None):
        """One agent step: up to ``max_attempts`` calls, each retry carrying the previous rejection."""
        feedback = ""
        for _ in range(self.max_attempts):
            reply = self.send(role, build(feedback_block(feedback)), path, schema)
            try:
                return parse(reply)
            except ValueError as exc:
                feedback = f"The previous reply was rejected: {exc}. Fix it and answer again."
        raise PipelineError(f"{role} gave no acceptable reply in {self.max_attempts} attempts: {feedback}", path)

    def ask_json(self, role: str, template: str, values: dict, model: type[BaseModel], path: str,
                 check: Callable[[BaseModel], None] | None = None):
        def parse(text):
            obj = parse_reply(text, model)
            if check is not None:
                check(obj)
            return obj

        return self.ask(role, lambda fb: render(template, feedback=fb, **values), path, parse,
                        model.model_json_schema())

    def fan_out(self, jobs: list[Callable[[], object]]) -> list:
        """Run sibling jobs, concurrently unless ``workers == 1``; every job finishes before errors surface."""
        if self.workers <= 1 or len(jobs) <= 1:
            results = []
            for job in jobs:
                try:
                    results.append(("ok", job()))
                except PipelineError as exc:
                    results.append(("err", exc))
        else:
            def wrap(job):
                try:
                    return "ok", job()
                except PipelineError as exc:
                    return "err", exc

            with ThreadPoolExecutor(max_workers=len(jobs)) as pool:
                results = list(pool.map(wrap, jobs))
        for status, value in results:
            if status == "err":
                raise value
        return [value for _, value in results]


def _session(client: ChatClient | Session, max_attempts: int = DEFAULT_ATTEMPTS) -> Session:
    return client if isinstance(client, Session) else Session(client, max_attempts)


def _need_text(value: str, what: str) -> None:
    if not isinstance(value, str) or not value.strip():
        raise ValueError(f"{what} must be non-empty")


# ---------------------------------------------------------------- agents

def classify(name: str, requirements: str, context: str, client, path: str | None = None) -> ClassifierReply:
    """atomic or coupled; an undecided answer is asked once more, then treated as coupled."""
    _need_text(requirements, "requirements")
    s, path = _session(client), path or name
    values = {"name": name, "req": requirements, "context_str": context or "None"}
    verdict = s.ask_json("classifier", "classifier", values, ClassifierReply, path)
    if verdict.model_type != "notsure":
        return verdict
    hint = (f"{context or ''}\n\nA first look at `{name}` could not decide between atomic and coupled "
            f"({verdict.reasoning.strip() or 'no reason given'}). Pick one of the two.").strip()
    again = s.ask_json("classifier", "classifier", {**values, "context_str": hint}, ClassifierReply, path)
    if again.model_type != "notsure":
        return again
    return ClassifierReply(model_type="coupled", submodels=again.submodels or verdict.submodels,
                           reasoning="undecided twice; treated as coupled")


def formulate_reply(name: str, requirements: str, context: str, client, path: str | None = None) -> FormulatorReply:
    _need_text(requirements, "requirements")
    values = {"name": name, "req": requirements, "context_str": context or "None"}
    return _session(client).ask_json("formulator", "formulator", values, FormulatorReply, path or name)


def formulate(name: str, requirements: str, context: str, client, path: str | None = None) -> ModelSpecification:
    return formulate_reply(name, requirements, context, client, path).core_model


def split(name: str, spec: ModelSpecification | str, context: str, client, path: str | None = None) -> SplitterReply:
    text = dump(spec) if isinstance(spec, ModelSpecification) else spec
    _need_text(text, "parent specification")
    values = {"name": name, "spec": text, "context_str": context or "None"}

    def check(reply: SplitterReply):
        unknown = unknown_class_references(reply.coupling_specification, [c.class_name for c in reply.children_plan])
        if unknown:
            raise ValueError(f"coupling_specification instantiates unknown classes {unknown}")

    return _session(client).ask_json("splitter", "splitter", values, SplitterReply, path or name, check)


# ---------------------------------------------------------------- planning

def root_requirements(spec_text: str, contract_text: str) -> str:
    _need_text(spec_text, "specification")
    _need_text(contract_text, "interface contract")
    return f"{spec_text.strip()}\n\n## Interface contract\n{contract_text.strip()}\n"


def _child_context(context: str, parent: str, coupling: str, siblings: list[str]) -> str:
    block = (f"`{parent}` contains {', '.join(siblings)}.\n"
             f"Instances and wiring inside `{parent}`:\n{coupling.strip()}")
    return f"{context.strip()}\n\n{block}" if context and context.strip() else block


def _plan_node(s: Session, name: str, req: str, context: str, spec: ModelSpecification | None,
               formal: bool, path: str) -> PlanNode:
    verdict = classify(name, req, context, s, path)
    if verdict.model_type == "atomic":
        if not formal:
            spec = formulate(name, req, context, s, path)
        return PlanNode(class_name=name, kind="atomic", spec=spec)
    if spec is None:
        spec = formulate(name, req, context, s, path)
    split_context = context
    if verdict.submodels:
        split_context = f"{context}\n\nCandidate sub-models: {', '.join(verdict.submodels)}".strip()
    reply = split(name, spec, split_context, s, path)
    names = [c.class_name for c in reply.children_plan]
    jobs = []
    for child in reply.children_plan:
        child_spec = ModelSpecification(**child.model_dump(exclude={"class_name"}))
        child_ctx = _child_context(context, name, reply.coupling_specification, names)
        jobs.append(lambda c=child, cs=child_spec, cc=child_ctx: _plan_node(
            s, c.class_name, dump(cs), cc, cs, False, f"{path}/{c.class_name}"))
    children = s.fan_out(jobs)
    return PlanNode(class_name=name, kind="coupled", spec=spec,
                    coupling_specification=reply.coupling_specification, children=children)


def plan(spec_text: str, contract_text: str, client, root_name: str = "System",
         max_attempts: int = DEFAULT_ATTEMPTS, workers: int = 4) -> PlanNode:
    """Build the plan tree top-down from a specification and its interface contract."""
    if not is_identifier(root_name):
        raise ValueError(f"root name {root_name!r} is not an identifier")
    s = client if isinstance(client, Session) else Session(client, max_attempts, workers)
    req = root_requirements(spec_text, contract_text)
    root = formulate_reply(root_name, req, "", s, root_name)
    tree = _plan_node(s, root_name, req, "", root.core_model, True, root_name)
    tree = tree.model_copy(update={"controller_info": root.controller_info})
    findings = validate_plan(tree)
    if findings:
        raise PipelineError("plan failed validation: " + "; ".join(findings), root_name)
    return tree


# ---------------------------------------------------------------- validation

_INSTANTIATE = re.compile(r"\binstantiate\s+(?:\d+\s+)?([A-Za-z_]\w*)", re.I)


def unknown_class_references(coupling: str, class_names: list[str]) -> list[str]:
    """Class names used in "Instantiate <Class> as ..." clauses that are not children."""
    known = set(class_names)
    out = []
    for word in _INSTANTIATE.findall(coupling or ""):
        if word in known or (word.endswith("s") and word[:-1] in known):
            continue
        if word not in out:
            out.append(word)
    return out


def validate_plan(tree: PlanNode) -> list[str]:
    findings: list[str] = []
    seen: dict[str, str] = {}
    for path, node in tree.walk():
        if not is_identifier(node.class_name):
            findings.append(f"{path}: class_name is not an identifier")
        if node.class_name in seen:
            findings.append(f"{path}: class_name {node.class_name} already used at {seen[node.class_name]}")
        else:
            seen[node.class_name] = path
        if node.kind == "atomic" and node.children:
            findings.append(f"{path}: atomic node has {len(node.children)} children")
        if node.kind == "coupled":
            if len(node.children) < 2:
                findings.append(f"{path}: coupled node has {len(node.children)} children, needs at least 2")
            for word in unknown_class_references(node.coupling_specification, [c.class_name for c in node.children]):
                findings.append(f"{path}: coupling refers to unknown class {word}")
        spec = node.spec
        for group in ("model_init_args", "input_ports", "output_ports"):
            for ent in getattr(spec, group):
                if ent.type in ("dict", "list") and not str(ent.structure).strip():
                    findings.append(f"{path}: {group} entry {ent.name} of type {ent.type} has no structure")
    return findings
