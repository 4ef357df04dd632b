"""Bottom-up construction: children first, parents conditioned on their children's summaries."""
from __future__ import annotations

import ast
import json
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .planner import DEFAULT_ATTEMPTS, PipelineError, Session
from .prompts import dump, extract_code, parse_reply, render, template
from .schemas import CodeArtifact, ModelSpecification, PlanNode

CONTROLLER = "main.py"
PLAN_FILE = "plan.json"


def module_name(class_name: str) -> str:
    return re.sub(r"([a-z0-9])([A-Z])", r"\1_\2", class_name).lower()


@dataclass
class Assembly:
    artifacts: dict[str, CodeArtifact] = field(default_factory=dict)
    controller: str = ""

    def files(self) -> dict[str, str]:
        """File name to content, in a fixed order."""
        out = {f"{a.module}.py": a.source for _, a in sorted(self.artifacts.items())}
        if self.controller:
            out[CONTROLLER] = self.controller
        return out

    def write(self, out_dir: str | Path) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for name, text in self.files().items():
            path = out / name
            path.write_text(text, encoding="utf-8")
            written.append(path)
        return written


def check_source(code: str, class_name: str | None = None) -> None:
    """Reject code that does not parse or lacks the expected class."""
    try:
        tree = ast.parse(code)
        compile(tree, "<generated>", "exec")
    except SyntaxError as exc:
        raise ValueError(f"code does not parse: line {exc.lineno}: {exc.msg}") from None
    if class_name is not None:
        classes = {n.name for n in tree.body if isinstance(n, ast.ClassDef)}
        if class_name not in classes:
            raise ValueError(f"no top-level class named {class_name}")


def check_summary(summary: ModelSpecification, source: str) -> None:
    missing = [p.name for p in summary.input_ports + summary.output_ports if p.name not in source]
    if missing:
        raise ValueError(f"summary lists ports absent from the code: {missing}")


def _sub_models_text(children: list[CodeArtifact]) -> str:
    if not children:
        return "None"
    parts = []
    for a in children:
        parts.append(f"### {a.class_name} (module `{a.module}`, import with: from {a.module} import {a.class_name})\n"
                     f"{dump(a.summary)}")
    return "\n\n".join(parts)


def summarize(code: str, sub_summaries: list[CodeArtifact] | str, client, path: str = "summary") -> ModelSpecification:
    """Interface actually implemented by ``code``, as read back by the summarizer agent."""
    if not code.strip():
        raise ValueError("source must be non-empty")
    s = client if isinstance(client, Session) else Session(client)
    subs = sub_summaries if isinstance(sub_summaries, str) else _sub_models_text(sub_summaries)
    return s.ask_json("summarizer", "summarizer", {"code": code.rstrip("\n"), "sub_models": subs},
                      ModelSpecification, path, check=lambda m: check_summary(m, code))


def _node_context(parent: PlanNode | None, node: PlanNode) -> str:
    if parent is None:
        return "This is the root model. A separate main.py parses flags, runs the simulation and prints the trace."
    return (f"`{node.class_name}` is a sub-model of `{parent.class_name}`.\n"
            f"Instances and wiring inside `{parent.class_name}`:\n{parent.coupling_specification.strip()}")


class Builder:
    def __init__(self, session: Session):
        self.s = session
        self._lock = threading.Lock()
        self.done: dict[str, CodeArtifact] = {}

    def _record(self, art: CodeArtifact) -> None:
        with self._lock:
            self.done[art.class_name] = art

    def _fail(self, exc: PipelineError) -> PipelineError:
        with self._lock:
            exc.partial = dict(self.done)
        return exc

    def generate(self, node: PlanNode, parent: PlanNode | None, children: list[CodeArtifact], path: str) -> str:
        kind = node.kind
        values = {
            "model_type": kind,
            "name": node.class_name,
            "module": module_name(node.class_name),
            "global_standards": template("standards").strip(),
            "model_specific_instructions": template(kind).strip(),
            "sub_models": _sub_models_text(children),
            "context_str": _node_context(parent, node),
            "util_desc": template("kernel_api").strip(),
            "spec": dump(node.spec) + (f"\n\nCoupling:\n{node.coupling_specification}" if kind == "coupled" else ""),
        }

        def parse(text):
            code = extract_code(text)
            check_source(code, node.class_name)
            return code

        return self.s.ask("generator", lambda fb: render("generator", feedback=fb, **values), path, parse)

    def build(self, node: PlanNode, parent: PlanNode | None = None, path: str = "") -> CodeArtifact:
        path = f"{path}/{node.class_name}" if path else node.class_name
        jobs = [lambda c=c: self.build(c, node, path) for c in node.children]
        children = self.s.fan_out(jobs)
        code = self.generate(node, parent, children, path)
        summary = summarize(code, children, self.s, path)
        art = CodeArtifact(class_name=node.class_name, module=module_name(node.class_name), source=code,
                           summary=summary)
        self._record(art)
        return art

    def controller(self, tree: PlanNode, root: CodeArtifact) -> str:
        values = {
            "name": tree.class_name,
            "module": root.module,
            "controller_info": (tree.controller_info or "Run the root model with default parameters.").strip(),
            "spec": dump(root.summary),
            "context_str": _node_context(None, tree),
        }

        def parse(text):
            code = extract_code(text)
            check_source(code)
            return code

        return self.s.ask("controller", lambda fb: render("controller", feedback=fb, **values), tree.class_name, parse)


def construct(tree: PlanNode, client, workers: int = 4, max_attempts: int = DEFAULT_ATTEMPTS) -> Assembly:
    """Generate every model bottom-up, then the controller entry point."""
    from .planner import validate_plan

    findings = validate_plan(tree)
    if findings:
        raise PipelineError("plan failed validation: " + "; ".join(findings), tree.class_name)
    modules = [module_name(n.class_name) for _, n in tree.walk()]
    if len(set(modules)) != len(modules) or "main" in modules:
        raise PipelineError(f"class names map to clashing module names: {modules}", tree.class_name)
    s = client if isinstance(client, Session) else Session(client, max_attempts, workers)
    b = Builder(s)
    try:
        root = b.build(tree)
        controller = b.controller(tree, root)
    except PipelineError as exc:
        raise b._fail(exc) from None
    return Assembly(dict(sorted(b.done.items())), controller)


def write_outputs(out_dir: str | Path, tree: PlanNode | None, assembly: Assembly | None) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if tree is not None:
        (out / PLAN_FILE).write_text(tree.to_json(), encoding="utf-8")
    if assembly is not None:
        assembly.write(out)
        summaries = {name: a.summary.model_dump(mode="json") for name, a in sorted(assembly.artifacts.items())}
        (out / "summaries.json").write_text(json.dumps(summaries, indent=2, sort_keys=True) + "\n", encoding="utf-8")
