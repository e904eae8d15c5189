"""Tool dispatch for agent sessions.

Plan sessions get everything except ``edit_file``; review sessions are
read-only. Edits are confined to the task scope and go through
:func:`archon.workspace.apply_edit` with the session's mutation token.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .. import checker
from ..diagnostics import ERROR
from ..tasks import PlanTask
from ..workspace import (
    Edit, EditRejected, MutationTokens, ProjectState, apply_edit, atomic_write, in_scope, sync_to_disk,
)
from . import references
from .protocol import (
    ASK_INFORMAL, EDIT_FILE, READ_LEDGER, READ_REFERENCE, RECORD_ROUTE, RUN_CHECK, SEARCH_LIBRARY,
    TOOLS, WRITE_SUMMARY, ToolCall, ToolResult,
)
from .providers import LIGHT, InformalAgent
from .search import StatementIndex, search_library

log = logging.getLogger(__name__)

PLAN, WORKER, REVIEW = "plan", "worker", "review"
ROLE_TOOLS = {
    WORKER: frozenset(TOOLS),
    PLAN: frozenset(TOOLS) - {EDIT_FILE},
    REVIEW: frozenset({READ_LEDGER, READ_REFERENCE, SEARCH_LIBRARY, WRITE_SUMMARY}),
}


@dataclass
class ToolContext:
    role: str
    task: PlanTask
    session_id: str
    state: ProjectState
    tokens: MutationTokens
    token: str | None = None
    backend: str = checker.TOY
    checker_config: checker.CheckerConfig = field(default_factory=checker.CheckerConfig)
    index: StatementIndex | None = None
    informal: InformalAgent | None = None
    ledger_view: Callable[[], dict] | None = None
    edited: set[str] = field(default_factory=set)
    summary: str | None = None
    payload: dict = field(default_factory=dict)

    @property
    def root(self) -> Path:
        return Path(self.state.root)


def _err(tool: str, message: str, **extra) -> ToolResult:
    return ToolResult(tool, False, {"error": message, **extra})


def dispatch_tool(call: ToolCall, ctx: ToolContext) -> ToolResult:
    if call.tool not in TOOLS:
        return _err(call.tool, f"unknown tool {call.tool!r}")
    if call.tool not in ROLE_TOOLS[ctx.role]:
        return _err(call.tool, f"tool {call.tool} is disabled for the {ctx.role} role")
    handler = _HANDLERS[call.tool]
    try:
        return handler(call.arguments, ctx)
    except (KeyError, TypeError, ValueError) as exc:
        return _err(call.tool, f"bad arguments: {exc}")


def _run_check(args: dict, ctx: ToolContext) -> ToolResult:
    report = checker.check(ctx.state, ctx.backend, ctx.checker_config)
    scope = ctx.task.scope
    diags = [d for d in report.diagnostics if not scope or in_scope(d.file, scope)]
    names = {d.name for d in ctx.state.declarations.values() if not scope or in_scope(d.path, scope)}
    return ToolResult(RUN_CHECK, True, {
        "success": not any(d.severity == ERROR for d in diags),
        "project_success": report.success,
        "diagnostics": [d.to_dict() for d in diags],
        "axiom_footprint": {k: sorted(v) for k, v in report.axiom_footprint.items() if k in names},
    })


def _search(args: dict, ctx: ToolContext) -> ToolResult:
    if ctx.index is None:
        return _err(SEARCH_LIBRARY, "no statement corpus configured")
    hits = search_library(str(args["query"]), int(args.get("k", 5)), ctx.index)
    return ToolResult(SEARCH_LIBRARY, True, {"results": [
        {"id": i, "statement": s, "score": round(sc, 6)} for i, s, sc in hits]})


def _ask_informal(args: dict, ctx: ToolContext) -> ToolResult:
    if ctx.informal is None:
        return _err(ASK_INFORMAL, "no informal agent configured")
    tier = args.get("tier", LIGHT)
    return ToolResult(ASK_INFORMAL, True, {"tier": tier, "answer": ctx.informal.ask(str(args["question"]), tier)})


def _read_reference(args: dict, ctx: ToolContext) -> ToolResult:
    try:
        text = references.read_reference(ctx.root / "references", str(args["name"]))
    except references.ReferenceNotFound:
        return _err(READ_REFERENCE, "not found", name=args["name"])
    return ToolResult(READ_REFERENCE, True, {"name": args["name"], "text": text})


def _route_dir(obligation: str) -> str:
    name = obligation.rsplit("::", 1)[-1]
    return re.sub(r"[^A-Za-z0-9_.'-]+", "_", name) or "_"


def _record_route(args: dict, ctx: ToolContext) -> ToolResult:
    d = ctx.root / "routes" / _route_dir(str(args["obligation"]))
    d.mkdir(parents=True, exist_ok=True)
    n = len(list(d.glob("route-*.md"))) + 1
    path = d / f"route-{n:03d}.md"
    atomic_write(path, f"# Route for {args['obligation']} ({ctx.session_id})\n\n{args['text']}\n")
    return ToolResult(RECORD_ROUTE, True, {"path": path.relative_to(ctx.root).as_posix()})


def _edit_file(args: dict, ctx: ToolContext) -> ToolResult:
    path = str(args["path"])
    if not in_scope(path, ctx.task.scope):
        return _err(EDIT_FILE, f"{path} is outside the task scope", path=path)
    current = ctx.state.files.get(path)
    if args.get("delete"):
        content = None
    elif "content" in args:
        content = str(args["content"])
    elif "old" in args:
        if current is None or args["old"] not in current.content:
            return _err(EDIT_FILE, "text to replace not found", path=path)
        content = current.content.replace(str(args["old"]), str(args.get("new", "")), 1)
    else:
        return _err(EDIT_FILE, "edit_file needs content, old/new, or delete", path=path)
    try:
        new_state = apply_edit(ctx.state, Edit(path, content, ctx.session_id, ctx.token), ctx.tokens)
    except EditRejected as exc:
        return _err(EDIT_FILE, str(exc), path=path)
    sync_to_disk(new_state, [path])
    ctx.state = new_state
    ctx.edited.add(path)
    f = new_state.files.get(path)
    return ToolResult(EDIT_FILE, True, {"path": path, "version": f.version if f else None,
                                        "diagnostics": [d.to_dict() for d in new_state.diagnostics
                                                        if d.file == path]})


def _read_ledger(args: dict, ctx: ToolContext) -> ToolResult:
    if ctx.ledger_view is None:
        return _err(READ_LEDGER, "no ledger attached")
    return ToolResult(READ_LEDGER, True, ctx.ledger_view())


def _write_summary(args: dict, ctx: ToolContext) -> ToolResult:
    summary = str(args.get("summary", "")).strip()
    if not summary:
        return _err(WRITE_SUMMARY, "summary must be non-empty")
    ctx.summary = summary
    ctx.payload = {k: v for k, v in args.items() if k != "summary"}
    return ToolResult(WRITE_SUMMARY, True, {"summary": summary})


_HANDLERS = {
    RUN_CHECK: _run_check,
    SEARCH_LIBRARY: _search,
    ASK_INFORMAL: _ask_informal,
    READ_REFERENCE: _read_reference,
    RECORD_ROUTE: _record_route,
    EDIT_FILE: _edit_file,
    READ_LEDGER: _read_ledger,
    WRITE_SUMMARY: _write_summary,
}
