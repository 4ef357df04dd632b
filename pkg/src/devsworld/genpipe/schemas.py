"""Structured intermediate representations exchanged with the chat model."""
from __future__ import annotations

import keyword
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

ALLOWED_TYPES = ("int", "float", "bool", "str", "dict", "list")
RESERVED_INIT_ARGS = ("self", "parent", "name")


def is_identifier(text: str) -> bool:
    return text.isidentifier() and not keyword.iskeyword(text)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class TypedEntity(_Strict):
    """An init argument or a port: name, whitelisted type, and a structure note."""

    name: str
    type: str
    structure: str = ""

    @field_validator("name")
    @classmethod
    def _name(cls, v: str) -> str:
        if not is_identifier(v):
            raise ValueError(f"{v!r} is not a valid identifier")
        return v

    @field_validator("type")
    @classmethod
    def _type(cls, v: str) -> str:
        v = v.strip()
        if v not in ALLOWED_TYPES:
            raise ValueError(f"type {v!r} not in {', '.join(ALLOWED_TYPES)}")
        return v

    @model_validator(mode="after")
    def _structure(self):
        if self.type in ("dict", "list") and not self.structure.strip():
            raise ValueError(f"{self.name}: {self.type} entities need a non-empty structure")
        return self


class ProtocolSpec(_Strict):
    description: str = ""
    initial_state: str = "None"
    initial_signal: str = "None"


class PortEntity(TypedEntity):
    protocol: ProtocolSpec = Field(default_factory=ProtocolSpec)


class LogEntity(_Strict):
    key: str
    value: str

    @field_validator("key")
    @classmethod
    def _key(cls, v: str) -> str:
        if not v.strip():
            raise ValueError("log keys must be non-empty")
        return v


class LogEntry(_Strict):
    dict_content: list[LogEntity]
    extra_info: str = ""


class LogContent(_Strict):
    detailed: list[LogEntry] = Field(default_factory=list)
    general: str = ""


class ModelSpecification(_Strict):
    function: str
    logging: LogContent
    model_init_args: list[TypedEntity] = Field(default_factory=list)
    input_ports: list[PortEntity] = Field(default_factory=list)
    output_ports: list[PortEntity] = Field(default_factory=list)

    @model_validator(mode="after")
    def _interface(self):
        for direction in ("input_ports", "output_ports"):
            names = [p.name for p in getattr(self, direction)]
            dup = sorted({n for n in names if names.count(n) > 1})
            if dup:
                raise ValueError(f"duplicate {direction}: {', '.join(dup)}")
        args = [a.name for a in self.model_init_args]
        if "self" in args:
            raise ValueError("'self' cannot be an init argument")
        dup = sorted({n for n in args if args.count(n) > 1})
        if dup:
            raise ValueError(f"duplicate init args: {', '.join(dup)}")
        return self


# ---------------------------------------------------------------- agent replies

class ClassifierReply(_Strict):
    model_type: Literal["atomic", "coupled", "notsure"]
    submodels: list[str] = Field(default_factory=list)
    reasoning: str = ""


class FormulatorReply(_Strict):
    core_model: ModelSpecification
    controller_info: str = ""


class ChildPlan(ModelSpecification):
    class_name: str

    @field_validator("class_name")
    @classmethod
    def _class_name(cls, v: str) -> str:
        if not is_identifier(v):
            raise ValueError(f"class_name {v!r} is not a valid identifier")
        return v


class SplitterReply(_Strict):
    children_plan: list[ChildPlan]
    coupling_specification: str

    @model_validator(mode="after")
    def _children(self):
        if len(self.children_plan) < 2:
            raise ValueError("a coupled model needs at least two children")
        names = [c.class_name for c in self.children_plan]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate child class names: {names}")
        return self


# ---------------------------------------------------------------- plan tree

class PlanNode(_Strict):
    """One model in the plan tree.  Structural rules are checked by ``validate_plan``."""

    class_name: str
    kind: Literal["atomic", "coupled"]
    spec: ModelSpecification
    coupling_specification: str = ""
    controller_info: Optional[str] = None
    children: list["PlanNode"] = Field(default_factory=list)

    def walk(self, path: str = ""):
        here = f"{path}/{self.class_name}" if path else self.class_name
        yield here, self
        for child in self.children:
            yield from child.walk(here)

    def leaves(self) -> int:
        return 1 if not self.children else sum(c.leaves() for c in self.children)

    def depth(self) -> int:
        return 1 + max((c.depth() for c in self.children), default=0)

    def to_json(self) -> str:
        return self.model_dump_json(indent=2, exclude_none=True) + "\n"


class CodeArtifact(_Strict):
    class_name: str
    module: str
    source: str
    summary: ModelSpecification
