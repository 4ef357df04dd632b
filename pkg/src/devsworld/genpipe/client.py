"""Chat-model clients: an abstract interface, a scripted mock, a recorder and an HTTP backend."""
from __future__ import annotations

import hashlib
import json
import os
import threading
import time
import urllib.error
import urllib.request
from abc import ABC, abstractmethod
from pathlib import Path

SCRIPT_VERSION = 1
API_KEY_ENV = "DEVSWORLD_API_KEY"


class ChatError(RuntimeError):
    """The backend could not produce a reply."""


class MockExhaustedError(ChatError):
    pass


def prompt_digest(role: str, prompt: str) -> str:
    """Key under which a mock script stores the reply to ``prompt`` sent by ``role``."""
    return hashlib.sha256(f"{role}\n{prompt}".encode("utf-8")).hexdigest()


class ChatClient(ABC):
    """Sends one role-tagged prompt, returns the raw reply text.

    ``schema`` is a JSON-schema hint for structured replies; callers always
    re-validate the reply locally.  Implementations must be thread-safe.
    """

    @abstractmethod
    def complete(self, role: str, prompt: str, schema: dict | None = None) -> str:
        ...


class MockClient(ChatClient):
    """Replays replies from a script keyed by prompt digest.

    Script format: ``{"version": 1, "responses": {digest: [reply, ...]}}``.
    Repeated identical prompts consume the list in order.
    """

    def __init__(self, responses: dict[str, list[str]]):
        self._responses = {k: list(v) for k, v in responses.items()}
        self._used: dict[str, int] = {}
        self._lock = threading.Lock()
        self.calls = 0

    @classmethod
    def from_file(cls, path: str | Path) -> "MockClient":
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ChatError(f"cannot load mock script {path}: {exc}") from exc
        if not isinstance(obj, dict) or obj.get("version") != SCRIPT_VERSION or not isinstance(obj.get("responses"), dict):
            raise ChatError(f"mock script {path} has the wrong shape")
        return cls(obj["responses"])

    def complete(self, role: str, prompt: str, schema: dict | None = None) -> str:
        key = prompt_digest(role, prompt)
        with self._lock:
            self.calls += 1
            replies = self._responses.get(key)
            n = self._used.get(key, 0)
            if not replies or n >= len(replies):
                raise MockExhaustedError(f"no scripted reply for {role} prompt {key[:12]}")
            self._used[key] = n + 1
            return replies[n]


class RecordingClient(ChatClient):
    """Wraps another client and records every exchange as a mock script."""

    def __init__(self, inner: ChatClient):
        self.inner = inner
        self._lock = threading.Lock()
        self.responses: dict[str, list[str]] = {}

    def complete(self, role: str, prompt: str, schema: dict | None = None) -> str:
        reply = self.inner.complete(role, prompt, schema)
        with self._lock:
            self.responses.setdefault(prompt_digest(role, prompt), []).append(reply)
        return reply

    def script(self) -> dict:
        return {"version": SCRIPT_VERSION, "responses": {k: self.responses[k] for k in sorted(self.responses)}}

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.script(), indent=1, ensure_ascii=False) + "\n", encoding="utf-8")


class HttpChatClient(ChatClient):
    """OpenAI-style ``/chat/completions`` backend; the API key comes from the environment."""

    def __init__(self, endpoint: str, model: str, api_key: str | None = None, timeout: float = 300.0,
                 attempts: int = 3, backoff: float = 2.0):
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self.timeout = timeout
        self.attempts = attempts
        self.backoff = backoff

    def _request(self, body: dict) -> dict:
        req = urllib.request.Request(
            self.endpoint + "/chat/completions",
            data=json.dumps(body).encode("utf-8"),
            headers={"Content-Type": "application/json", "Authorization": f"Bearer {self.api_key}"},
        )
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            return json.loads(resp.read().decode("utf-8"))

    def complete(self, role: str, prompt: str, schema: dict | None = None) -> str:
        body: dict = {
            "model": self.model,
            "messages": [{"role": "system", "content": f"You act as the {role} agent."},
                         {"role": "user", "content": prompt}],
        }
        if schema is not None:
            body["response_format"] = {"type": "json_schema",
                                       "json_schema": {"name": role, "schema": schema}}
        last: Exception | None = None
        for attempt in range(self.attempts):
            try:
                data = self._request(body)
                return data["choices"][0]["message"]["content"]
            except (urllib.error.URLError, OSError, ValueError, KeyError, IndexError) as exc:
                last = exc
                if attempt + 1 < self.attempts:
                    time.sleep(self.backoff * (attempt + 1))
        raise ChatError(f"chat backend failed after {self.attempts} attempts: {last}")
