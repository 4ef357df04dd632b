from __future__ import annotations

import json
import re
import string
from functools import lru_cache
from importlib import resources

from pydantic import BaseModel, ValidationError

TEMPLATES = ("classifier", "formulator", "splitter", "generator", "standards", "atomic", "coupled",
             "summarizer", "controller", "kernel_api")


@lru_cache(maxsize=None)
def template(name: str) -> str:
    if name not in TEMPLATES:
        raise KeyError(f"unknown template {name!r}")
    return resources.files("devsworld.genpipe").joinpath("templates", f"{name}.md").read_text(encoding="utf-8")


def slots(name: str) -> set[str]:
    return {f for _, f, _, _ in string.Formatter().parse(template(name)) if f}


def render(which: str, /, **values: str) -> str:
    """Fill a template; every slot must be supplied and no extra values are accepted."""
    wanted = slots(which)
    missing, extra = wanted - set(values), set(values) - wanted
    if missing or extra:
        raise KeyError(f"template {which}: missing {sorted(missing)}, unexpected {sorted(extra)}")
    return template(which).format(**values)


def feedback_block(message: str) -> str:
    return f"\n## Reviewer feedback\n{message}\n" if message else ""


def dump(model: BaseModel) -> str:
    return json.dumps(model.model_dump(mode="json"), indent=2, sort_keys=True, ensure_ascii=False)


_FENCE = re.compile(r"^```[a-zA-Z]*\n|\n?```\s*$")


def extract_json(text: str) -> str:
    text = _FENCE.sub("", text.strip())
    start, end = text.find("{"), text.rfind("}")
    if start < 0 or end < start:
        raise ValueError("reply contains no JSON object")
    return text[start:end + 1]


def parse_reply(text: str, model: type[BaseModel]):
    """Validate a JSON reply; raises ValueError with a readable message."""
    try:
        return model.model_validate_json(extract_json(text))
    except ValidationError as exc:
        problems = "; ".join(f"{'.'.join(str(p) for p in e['loc']) or '<root>'}: {e['msg']}" for e in exc.errors())
        raise ValueError(problems) from None


_CODE = re.compile(r"<python_code>\s*\n?(.*?)</python_code>", re.S)


def extract_code(text: str) -> str:
    m = _CODE.search(text)
    if not m:
        raise ValueError("reply has no <python_code> block")
    code = m.group(1).strip("\n")
    if not code.strip():
        raise ValueError("the <python_code> block is empty")
    return code + "\n"
