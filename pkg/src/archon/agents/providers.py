"""Model providers.

Every provider speaks the same three verbs: ``open_context`` (system prompt
plus session metadata, returns a handle), ``next_turn`` (history in, one
agent turn out) and ``close``. Handles keep concurrent sessions apart.

Script format for :class:`ScriptedProvider`::

    {
      "sessions": [
        {"role": "worker", "key": "src/A.mck::t",
         "turns": [
           {"tool": "edit_file", "args": {"path": "src/A.mck", "old": "sorry", "new": "refl"}},
           {"tool": "run_check"},
           {"tool": "write_summary", "args": {"summary": "closed t"}}
         ]}
      ],
      "informal": [{"match": "lemma L", "response": "..."}],
      "default_informal": "..."
    }

A session takes the first unconsumed entry of its role whose ``key`` is the
task id, one of its targets or scope entries (or which has no key). A turn is
either a single call (``tool``/``args``) or ``{"content", "tool_calls",
"signal"}``; ``{"transport_error": true}`` simulates a failed request.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

from .protocol import AGENT, STUCK, TOOLS, ToolCall, Turn

LIGHT, DEEP = "light", "deep"


class TransportError(Exception):
    pass


class Provider(Protocol):
    def open_context(self, system_prompt: str, meta: dict) -> object: ...

    def next_turn(self, handle: object, history: list[Turn]) -> Turn: ...

    def close(self, handle: object) -> None: ...


class InformalAgent(Protocol):
    def ask(self, question: str, tier: str = LIGHT) -> str: ...


def _parse_turn(raw: dict) -> Turn:
    if "tool" in raw:
        calls = [ToolCall(raw["tool"], dict(raw.get("args", raw.get("arguments", {}))))]
        return Turn.make(AGENT, raw.get("content", ""), calls, signal=raw.get("signal"))
    calls = [ToolCall(c["tool"], dict(c.get("args", c.get("arguments", {}))))
             for c in raw.get("tool_calls", [])]
    return Turn.make(AGENT, raw.get("content", ""), calls, signal=raw.get("signal"))


@dataclass
class _Cursor:
    turns: list[dict]
    pos: int = 0
    entry: int | None = None


class ScriptedProvider:
    def __init__(self, script: dict):
        self.script = script
        self._entries = list(script.get("sessions", []))
        for e in self._entries:
            for t in e.get("turns", []):
                for name in [t.get("tool")] + [c.get("tool") for c in t.get("tool_calls", [])]:
                    if name is not None and name not in TOOLS:
                        raise ValueError(f"script uses unknown tool {name!r}")
        self._used: set[int] = set()
        self._lock = threading.Lock()
        blob = json.dumps(script, sort_keys=True).encode()
        self.ident = "script:" + hashlib.sha256(blob).hexdigest()[:12]

    @classmethod
    def from_file(cls, path) -> "ScriptedProvider":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    def open_context(self, system_prompt: str, meta: dict) -> _Cursor:
        keys = set(meta.get("keys", ()))
        with self._lock:
            for i, e in enumerate(self._entries):
                if i in self._used or e.get("role") != meta.get("role"):
                    continue
                if e.get("key") is None or e["key"] in keys:
                    self._used.add(i)
                    return _Cursor(list(e.get("turns", [])), entry=i)
        return _Cursor([])

    def next_turn(self, handle: _Cursor, history: list[Turn]) -> Turn:
        if handle.pos >= len(handle.turns):
            return Turn.make(AGENT, "script exhausted", signal=STUCK)
        raw = handle.turns[handle.pos]
        handle.pos += 1
        if raw.get("transport_error"):
            raise TransportError("scripted transport failure")
        return _parse_turn(raw)

    def close(self, handle: _Cursor) -> None:
        handle.pos = len(handle.turns)

    def fast_forward(self, past: list[dict]) -> None:
        """Consume the entries that earlier sessions (same script) already used."""
        for meta in past:
            self.open_context("", meta)

    def remaining(self) -> int:
        return len(self._entries) - len(self._used)


class ScriptedInformal:
    """Canned informal answers: first ``match`` substring found in the question wins."""

    def __init__(self, entries=(), default: str = "No informal sub-proof available."):
        self.entries = list(entries)
        self.default = default

    @classmethod
    def from_script(cls, script: dict) -> "ScriptedInformal":
        return cls(script.get("informal", []), script.get("default_informal", "No informal sub-proof available."))

    def ask(self, question: str, tier: str = LIGHT) -> str:
        for e in self.entries:
            if e["match"] in question and e.get("tier", tier) == tier:
                return e["response"]
        return self.default


@dataclass
class HttpProvider:
    """JSON-over-HTTP provider.

    Request: ``{"messages": [...], "tools": [...], "max_tokens": n}``.
    Response: ``{"content": str, "tool_calls": [{"tool", "arguments"}], "signal": str|null}``.
    """

    endpoint: str
    credentials_env: str = "ARCHON_API_KEY"
    max_tokens: int = 1024
    timeout: float = 120.0
    tools: tuple[str, ...] = TOOLS
    tier: str = LIGHT

    def _post(self, payload: dict) -> dict:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.credentials_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        req = urllib.request.Request(self.endpoint, data=json.dumps(payload).encode(), headers=headers)
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, ValueError) as exc:
            raise TransportError(str(exc)) from exc

    @property
    def ident(self) -> str:
        return "http:" + self.endpoint

    def open_context(self, system_prompt: str, meta: dict) -> dict:
        return {"system": system_prompt, "meta": meta}

    def next_turn(self, handle: dict, history: list[Turn]) -> Turn:
        messages = [{"role": t.role, "content": t.content,
                     **({"tool_calls": [c.to_json() for c in t.tool_calls]} if t.tool_calls else {}),
                     **({"result": t.result.to_json()} if t.result else {})}
                    for t in history]
        data = self._post({"messages": messages, "tools": list(self.tools), "max_tokens": self.max_tokens,
                           "tier": self.tier})
        return _parse_turn({"content": data.get("content", ""), "tool_calls": data.get("tool_calls", []),
                            "signal": data.get("signal")})

    def close(self, handle: dict) -> None:
        pass


@dataclass
class HttpInformal:
    endpoint: str
    credentials_env: str = "ARCHON_API_KEY"
    timeout: float = 300.0
    provider: HttpProvider = field(init=False)

    def __post_init__(self):
        self.provider = HttpProvider(self.endpoint, self.credentials_env, timeout=self.timeout)

    def ask(self, question: str, tier: str = LIGHT) -> str:
        data = self.provider._post({"messages": [{"role": "agent", "content": question}],
                                    "tools": [], "max_tokens": 2048, "tier": tier})
        return data.get("content", "")
