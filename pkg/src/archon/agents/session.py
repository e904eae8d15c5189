"""One bounded agent session: fresh context, tool loop, mandatory summary."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Callable

from ..tasks import PlanTask
from .protocol import AGENT, COMPLETE, STUCK, SYSTEM, TOOL, WRITE_SUMMARY, ToolResult, Turn, token_estimate
from .providers import Provider, TransportError
from .skills import SkillDoc, skills_for
from .tools import PLAN, REVIEW, WORKER, ToolContext, dispatch_tool

log = logging.getLogger(__name__)

COMPLETED, STUCK_OUTCOME, BUDGET_EXHAUSTED, ABORTED = "completed", "stuck", "budget_exhausted", "aborted"

ROLE_PROMPTS = {
    PLAN: (
        "You are the Plan agent. Read the open obligations, recent session summaries and any "
        "guidance, then split the work into tasks with disjoint file scopes. You cannot edit "
        "proof files. Finish with write_summary, passing the tasks you want dispatched."
    ),
    WORKER: (
        "You are a proof worker. Close the target obligations by editing files inside your scope "
        "only. Use run_check to confirm your edits. Finish with write_summary describing what "
        "changed and what is still blocking."
    ),
    REVIEW: (
        "You are the Review agent. Read the ledger and summarize progress trends across recent "
        "sessions. You cannot change the formalization. Finish with write_summary."
    ),
}


@dataclass(frozen=True)
class Budget:
    tokens: int = 4096
    max_turns: int | None = None
    retries: int = 2


@dataclass
class SessionRecord:
    id: str
    role: str
    task: PlanTask
    turns: list[Turn] = field(default_factory=list)
    outcome: str = STUCK_OUTCOME
    summary: str = ""
    started: str = ""
    ended: str = ""
    payload: dict = field(default_factory=dict)
    edited: tuple[str, ...] = ()
    context: ToolContext | None = field(default=None, compare=False, repr=False)

    @property
    def tool_calls(self):
        return [c for t in self.turns if t.role == AGENT for c in t.tool_calls]

    @property
    def token_total(self) -> int:
        return sum(t.token_estimate for t in self.turns)

    def to_json(self) -> dict:
        return {
            "id": self.id, "role": self.role, "task": self.task.to_json(), "outcome": self.outcome,
            "summary": self.summary, "started": self.started, "ended": self.ended,
            "payload": self.payload, "edited": list(self.edited),
            "turns": [t.to_json() for t in self.turns],
        }


def build_context(role: str, task: PlanTask, skills: list[SkillDoc]) -> str:
    """The opening system turn: role prompt, skills, task, referenced materials. Nothing else."""
    parts = [f"# Role: {role}", ROLE_PROMPTS[role]]
    if skills:
        parts.append("# Skills")
        for s in skills:
            parts.append(f"## {s.name}\nWhen: {s.trigger_description}\n{s.body}")
    parts.append(f"# Task {task.id}")
    if task.targets:
        parts.append("Targets: " + ", ".join(task.targets))
    if task.scope:
        parts.append("Scope: " + ", ".join(task.scope))
    if task.guidance:
        parts.append("Guidance:\n" + task.guidance)
    if task.constraints:
        parts.append("Constraints:\n" + task.constraints)
    if task.materials:
        parts.append("# Materials")
        for title, text in task.materials:
            parts.append(f"## {title}\n{text}")
    return "\n\n".join(parts)


def _fit(result: ToolResult, remaining: int) -> Turn:
    content = json.dumps(result.to_json(), sort_keys=True, ensure_ascii=False)
    turn = Turn.make(TOOL, content, result=result)
    if turn.token_estimate <= remaining:
        return turn
    words = content.split()
    keep = max(0, int(remaining / 1.3))
    while keep and token_estimate(" ".join(words[:keep])) > remaining:
        keep -= 1
    return Turn(TOOL, " ".join(words[:keep]), (), token_estimate(" ".join(words[:keep])), result)


def run_session(session_id: str, role: str, task: PlanTask, provider: Provider, ctx: ToolContext,
                skills: dict[str, SkillDoc], budget: Budget,
                clock: Callable[[], str] = lambda: "") -> SessionRecord:
    if role == WORKER and not task.scope:
        raise ValueError("worker sessions need a non-empty scope")
    record = SessionRecord(session_id, role, task, started=clock())
    system = Turn.make(SYSTEM, build_context(role, task, skills_for(skills, role)))
    used = system.token_estimate
    record.turns.append(system)
    outcome = None
    last_content = ""
    if used > budget.tokens:
        outcome = BUDGET_EXHAUSTED
    handle = provider.open_context(system.content, {"role": role, "task": task.id,
                                                    "keys": sorted(task.match_keys()), "session": session_id})
    agent_turns = 0
    try:
        while outcome is None:
            if budget.max_turns is not None and agent_turns >= budget.max_turns:
                outcome = BUDGET_EXHAUSTED
                break
            turn = None
            for attempt in range(budget.retries + 1):
                try:
                    turn = provider.next_turn(handle, list(record.turns))
                    break
                except TransportError as exc:
                    log.warning("session %s: transport failure (%s), attempt %d", session_id, exc, attempt + 1)
            if turn is None:
                outcome = ABORTED
                break
            if used + turn.token_estimate > budget.tokens:
                outcome = BUDGET_EXHAUSTED
                break
            record.turns.append(turn)
            used += turn.token_estimate
            agent_turns += 1
            last_content = turn.content or last_content
            finished = False
            for call in turn.tool_calls:
                result = dispatch_tool(call, ctx)
                tool_turn = _fit(result, budget.tokens - used)
                record.turns.append(tool_turn)
                used += tool_turn.token_estimate
                if call.tool == WRITE_SUMMARY and result.ok:
                    finished = True
                    break
                if used >= budget.tokens:
                    outcome = BUDGET_EXHAUSTED
                    break
            if outcome is not None:
                break
            if finished or turn.signal == COMPLETE:
                outcome = COMPLETED
            elif turn.signal == STUCK or not turn.tool_calls:
                outcome = STUCK_OUTCOME
    finally:
        provider.close(handle)
    record.outcome = outcome
    record.summary = ctx.summary or _fallback_summary(record, last_content)
    record.payload = dict(ctx.payload)
    record.edited = tuple(sorted(ctx.edited))
    record.context = ctx
    record.ended = clock()
    return record


def _fallback_summary(record: SessionRecord, last_content: str) -> str:
    calls = len(record.tool_calls)
    text = f"{record.role} session {record.id} ended {record.outcome} after {calls} tool call(s)"
    if last_content and last_content != "script exhausted":
        text += f"; last message: {last_content}"
    return text
