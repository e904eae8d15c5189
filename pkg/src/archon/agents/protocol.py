from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

SYSTEM, AGENT, TOOL = "system", "agent", "tool"

RUN_CHECK = "run_check"
SEARCH_LIBRARY = "search_library"
ASK_INFORMAL = "ask_informal"
READ_REFERENCE = "read_reference"
RECORD_ROUTE = "record_route"
EDIT_FILE = "edit_file"
READ_LEDGER = "read_ledger"
WRITE_SUMMARY = "write_summary"
TOOLS = (RUN_CHECK, SEARCH_LIBRARY, ASK_INFORMAL, READ_REFERENCE, RECORD_ROUTE,
         EDIT_FILE, READ_LEDGER, WRITE_SUMMARY)

COMPLETE, STUCK = "complete", "stuck"


def token_estimate(text: str) -> int:
    """Word count x 1.3, rounded up. Only used for budget accounting."""
    return math.ceil(len(text.split()) * 1.3)


@dataclass(frozen=True)
class ToolCall:
    tool: str
    arguments: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"tool": self.tool, "arguments": self.arguments}


@dataclass(frozen=True)
class ToolResult:
    tool: str
    ok: bool
    result: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"tool": self.tool, "ok": self.ok, "result": self.result}


@dataclass(frozen=True)
class Turn:
    role: str
    content: str = ""
    tool_calls: tuple[ToolCall, ...] = ()
    token_estimate: int = 0
    result: ToolResult | None = None
    signal: str | None = None

    @classmethod
    def make(cls, role: str, content: str = "", tool_calls=(), result: ToolResult | None = None,
             signal: str | None = None) -> "Turn":
        text = content + " ".join(json.dumps(c.to_json(), sort_keys=True) for c in tool_calls)
        return cls(role, content, tuple(tool_calls), token_estimate(text), result, signal)

    def to_json(self) -> dict:
        d = {"role": self.role, "content": self.content, "token_estimate": self.token_estimate}
        if self.tool_calls:
            d["tool_calls"] = [c.to_json() for c in self.tool_calls]
        if self.result is not None:
            d["result"] = self.result.to_json()
        if self.signal:
            d["signal"] = self.signal
        return d
