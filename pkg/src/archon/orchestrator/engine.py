"""The run loop: scaffold, then plan/prove/review cycles, then polish and gate.

All state transitions go through :class:`Orchestrator`, which owns the
ProjectState value, the mutation tokens and the ledger. Worker sessions in a
wave run concurrently on private copies of the state; their edits are merged
in task order afterwards so the outcome does not depend on scheduling.
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Sequence

import filelock

from .. import checker, gate
from ..agents.providers import HttpInformal, HttpProvider, Provider, ScriptedInformal, ScriptedProvider
from ..agents.search import StatementIndex
from ..agents.session import ABORTED, COMPLETED, Budget, SessionRecord, run_session
from ..agents.skills import load_skills
from ..agents.tools import PLAN, REVIEW, WORKER, ToolContext
from ..config import Config
from ..diagnostics import ERROR
from ..tasks import PlanTask
from ..workspace import (
    CLOSED, COMPLETE, OPEN, MutationTokens, Obligation, ProjectState, atomic_write, build_state,
    dependency_partition, reconcile, scan_project, sync_to_disk,
)
from . import ledger as L
from .checkpoint import Checkpoint, checkpoint as take_checkpoint
from .review import ESCALATE_INFORMAL, REQUEST_GUIDANCE, REVISE_DECOMPOSITION, ReviewReport, analyze, \
    sessions_since_review

log = logging.getLogger(__name__)

SCAFFOLDING, PROVING, POLISH, DONE, FAILED = "scaffolding", "proving", "polish", "done", "failed"
PHASES = (SCAFFOLDING, PROVING, POLISH, DONE, FAILED)
_LEGAL = {(None, SCAFFOLDING), (SCAFFOLDING, PROVING), (PROVING, POLISH), (PROVING, PROVING),
          (POLISH, DONE), (POLISH, PROVING)}
GUIDANCE_DIR = "routes/guidance"
LOCK_FILE = ".archon/run.lock"

DIRECTIVES = {
    REVISE_DECOMPOSITION: ("Directive: recent sessions stalled on these targets. Before retrying, "
                           "consider restating or splitting the blocking declarations."),
    ESCALATE_INFORMAL: ("Directive: call ask_informal for an informal argument for each stalled "
                        "target before editing."),
}


class PhaseError(RuntimeError):
    pass


class WorkspaceBusy(RuntimeError):
    pass


def legal(src: str | None, dst: str) -> bool:
    return dst == FAILED or (src, dst) in _LEGAL


def make_provider(root, cfg: Config) -> tuple[Provider, object | None]:
    p = cfg.provider
    if p.kind == "scripted":
        path = Path(root) / p.script
        script = json.loads(path.read_text(encoding="utf-8"))
        return ScriptedProvider(script), ScriptedInformal.from_script(script)
    informal = HttpInformal(p.informal_endpoint, p.credentials_env) if p.informal_endpoint else None
    return HttpProvider(p.endpoint, p.credentials_env), informal


def diagnostic_signature(diags) -> str:
    blob = json.dumps(sorted([d.severity, d.kind, d.message] for d in diags))
    return hashlib.sha1(blob.encode()).hexdigest()[:12]


def _decl_at(state: ProjectState, path: str, line: int):
    for d in state.decls_in(path):
        lo, hi = d.location[1]
        if lo <= line <= hi:
            return d
    return None


class Orchestrator:
    def __init__(self, root, config: Config, provider: Provider | None = None, informal=None):
        self.root = Path(root).resolve()
        self.cfg = config
        if provider is None:
            provider, informal = make_provider(self.root, config)
        self.provider = provider
        self.informal = informal
        self.ledger = L.StatusLedger(self.root, replay=config.run.replay)
        self.tokens = MutationTokens()
        self.skills = load_skills(self.root)
        self.index = StatementIndex.from_jsonl(self.root / config.paths.corpus)
        self.checker_config = checker.CheckerConfig(config.backend.command, config.backend.timeout)
        self.backend = config.backend.kind
        state = scan_project(self.root)
        if self.ledger.position:
            state = state.with_obligations(L.obligations_from(self.ledger.events))
        self.state = state
        self._sessions = sum(1 for e in self.ledger.events if e["type"] == L.SESSION_SUMMARY)
        self.provider_id = getattr(provider, "ident", type(provider).__name__)
        if hasattr(provider, "fast_forward"):
            provider.fast_forward([
                {"role": d["role"], "keys": sorted({d["task_id"], *d["targets"], *d["scope"]})}
                for d in (e["data"] for e in self.ledger.events if e["type"] == L.SESSION_SUMMARY)
                if d.get("provider") == self.provider_id])

    # -- ledger helpers -----------------------------------------------------------

    @property
    def phase(self) -> str:
        return self.ledger.view()["phase"] or SCAFFOLDING

    def _phase(self, to: str, **data) -> None:
        current = self.ledger.view()["phase"]
        if not legal(current, to):
            raise PhaseError(f"illegal phase transition {current} -> {to}")
        self.ledger.append(L.PHASE_CHANGE, {"from": current, "to": to, **data})

    def _next_session_id(self) -> str:
        self._sessions += 1
        return f"s{self._sessions:04d}"

    def _ledger_view(self) -> dict:
        view = self.ledger.view()
        recent = [e["data"] for e in self.ledger.events if e["type"] == L.SESSION_SUMMARY][-5:]
        return {"phase": view["phase"], "open_obligations": view["open_obligations"],
                "files": view["files"], "last_review": view["last_review"],
                "recent_sessions": [{k: s.get(k) for k in ("session_id", "role", "targets", "outcome", "summary")}
                                    for s in recent]}

    def _budget(self, tokens: int) -> Budget:
        return Budget(tokens, self.cfg.budgets.max_turns or None, self.cfg.budgets.transport_retries)

    def _context(self, role: str, task: PlanTask, sid: str, state: ProjectState, token=None) -> ToolContext:
        return ToolContext(role, task, sid, state, self.tokens, token, self.backend, self.checker_config,
                           self.index, self.informal, self._ledger_view)

    def _session(self, role: str, task: PlanTask, sid: str, state: ProjectState, token=None) -> SessionRecord:
        ctx = self._context(role, task, sid, state, token)
        return run_session(sid, role, task, self.provider, ctx, self.skills, self._budget(task.budget),
                           clock=self.ledger.clock)

    def _save_transcript(self, record: SessionRecord) -> None:
        atomic_write(self.root / "ledger" / "sessions" / f"{record.id}.json",
                     json.dumps(record.to_json(), indent=1, sort_keys=True, ensure_ascii=False) + "\n")

    def _check(self) -> checker.CheckReport:
        return checker.check(self.state, self.backend, self.checker_config)

    def _log_check(self, report: checker.CheckReport) -> None:
        errors: dict[str, int] = {}
        for d in report.errors():
            errors[d.file] = errors.get(d.file, 0) + 1
        self.ledger.append(L.CHECK_SUMMARY, {
            "success": report.success,
            "errors": len(report.errors()),
            "placeholders": len(report.placeholders()),
            "errors_by_file": dict(sorted(errors.items())),
            "diagnostics": [d.render() for d in report.errors()][:50],
        })

    def _log_obligation_diff(self, before: dict[str, Obligation], after: dict[str, Obligation],
                             reason: str = "") -> None:
        for oid in sorted(after):
            new, old = after[oid], before.get(oid)
            if old == new:
                continue
            records = [list(h) for h in new.history[len(old.history) if old else 0:]]
            if old is None:
                event = "opened"
            elif old.status == CLOSED and new.status == OPEN:
                event = "reopened"
            elif new.status == CLOSED and old.status != CLOSED:
                event = "refactored" if records and records[-1][1] == "refactored" else "closed"
            else:
                event = "attempted"
            data = {"obligation": oid, "event": event, "status": new.status, "records": records}
            if reason:
                data["reason"] = reason
            self.ledger.append(L.OBLIGATION_EVENT, data)

    def _materials_for(self, state: ProjectState, task_scope, targets) -> list[tuple[str, str]]:
        out = []
        for path in sorted(state.files):
            if any(path == s or (s.endswith("/") and path.startswith(s)) for s in task_scope):
                out.append((f"File {path}", state.files[path].content))
        for oid in targets:
            rdir = self.root / "routes" / oid.rsplit("::", 1)[-1]
            for r in sorted(rdir.glob("route-*.md")) if rdir.is_dir() else ():
                out.append((f"Route {r.relative_to(self.root).as_posix()}", r.read_text(encoding="utf-8")))
        return out

    # -- merge and commit ---------------------------------------------------------

    def _merge(self, base: ProjectState, records: Sequence[SessionRecord]) -> ProjectState:
        files = dict(base.files)
        for rec in records:
            local = rec.context.state
            for path in rec.edited:
                if path in local.files:
                    files[path] = local.files[path]
                else:
                    files.pop(path, None)
        merged = build_state(base.root, files)
        obls = dict(base.obligations)
        for rec in records:
            for path in rec.edited:
                obls = reconcile(obls, merged, path, rec.id)
        return merged.with_obligations(obls)

    def _close_complete(self, report: checker.CheckReport, outcomes: dict[str, tuple[str, str]]) -> None:
        """Close every open obligation whose declaration is complete in an error-free file.

        ``outcomes`` maps targeted obligation ids to (session id, session outcome);
        those get an attempt recorded either way.
        """
        bad_files = {d.file for d in report.errors()}
        obls = dict(self.state.obligations)
        for oid, o in obls.items():
            if o.status != OPEN:
                continue
            decl = self.state.declaration_for(oid)
            done = decl is not None and decl.proof_state == COMPLETE and decl.path not in bad_files
            if oid in outcomes:
                sid, outcome = outcomes[oid]
                obls[oid] = o.record(sid, "closed" if done else outcome, CLOSED if done else OPEN)
            elif done:
                obls[oid] = Obligation(o.id, CLOSED, o.attempts, o.history)
        self.state = self.state.with_obligations(obls)

    def _signature(self, report: checker.CheckReport, oid: str) -> str:
        decl = self.state.declaration_for(oid)
        if decl is None:
            return "missing"
        lo, hi = decl.location[1]
        diags = [d for d in report.diagnostics if d.file == decl.path and lo <= d.span[0] <= hi]
        return diagnostic_signature(diags)

    def _commit_sessions(self, records: Sequence[SessionRecord], before: dict[str, Obligation],
                         report: checker.CheckReport) -> None:
        after = self.state.obligations
        for rec in records:
            closed = [o for o in rec.task.targets if after.get(o) and after[o].status == CLOSED
                      and (before.get(o) is None or before[o].status != CLOSED)]
            scope_diags = [d.render() for d in report.errors()
                           if any(d.file == s or (s.endswith("/") and d.file.startswith(s)) for s in rec.task.scope)]
            self.ledger.append(L.SESSION_SUMMARY, {
                "session_id": rec.id, "role": rec.role, "task_id": rec.task.id, "provider": self.provider_id,
                "targets": list(rec.task.targets), "scope": list(rec.task.scope),
                "outcome": rec.outcome, "summary": rec.summary, "tool_calls": len(rec.tool_calls),
                "tokens": rec.token_total, "edited": list(rec.edited), "closed": closed,
                "signatures": {o: self._signature(report, o) for o in rec.task.targets},
                "diagnostics": scope_diags[:20],
                **({"payload": rec.payload} if rec.role == PLAN else {}),
            })
            self._save_transcript(rec)
        # refactor events precede the obligation events they explain
        for rec in records:
            def new_records(oid, o):
                return o.history[len(before[oid].history) if oid in before else 0:]
            refactored = sorted(oid for oid, o in after.items() if (rec.id, "refactored") in new_records(oid, o))
            reopened = sorted(oid for oid, o in after.items() if (rec.id, "reopened") in new_records(oid, o))
            opened = sorted(oid for oid in after if oid not in before)
            if refactored or reopened:
                self.ledger.append(L.REFACTOR_EVENT, {
                    "session_id": rec.id, "kind": "restructure", "closed_as_refactored": refactored,
                    "reopened": reopened, "opened": opened, "files": list(rec.edited)})
        self._log_obligation_diff(before, after)
        self._log_check(report)

    # -- phases -------------------------------------------------------------------

    def scaffold(self, informal_proof: str | None = None) -> list[PlanTask]:
        if self.phase != SCAFFOLDING:
            raise PhaseError(f"scaffold needs phase scaffolding, not {self.phase}")
        if self.ledger.view()["phase"] is None:
            self._phase(SCAFFOLDING)
        if informal_proof is None:
            p = self.root / self.cfg.paths.informal_proof
            informal_proof = p.read_text(encoding="utf-8") if p.exists() else ""
        before = dict(self.state.obligations)
        if self.state.files or not informal_proof.strip():
            # sources already present (or nothing to formalize): register what is there
            obls = dict(before)
            for path in sorted(self.state.files):
                obls = reconcile(obls, self.state, path, "scaffold")
            self.state = self.state.with_obligations(obls)
            self._log_obligation_diff(before, self.state.obligations)
            self._log_check(self._check())
            self._phase(PROVING, reason="existing sources" if self.state.files else "nothing to formalize")
            return []
        task = PlanTask("scaffold", scope=("src/",), budget=self.cfg.budgets.worker_tokens,
                        guidance="Split the informal proof into modules under src/. State every claim "
                                 "and leave each proof as a placeholder.",
                        materials=(("Informal proof", informal_proof),))
        sid = self._next_session_id()
        token = self.tokens.issue(task.scope, sid)
        try:
            rec = self._session(WORKER, task, sid, self.state, token)
        finally:
            self.tokens.release(token)
        self.state = self._merge(self.state, [rec])
        report = self._check()
        self._commit_sessions([rec], before, report)
        if rec.outcome != COMPLETED:
            log.warning("scaffolding session %s ended %s", sid, rec.outcome)
            return []
        self._phase(PROVING, reason="scaffolded")
        return []

    def _new_guidance(self) -> list[tuple[str, str, str]]:
        consumed = {(e["data"]["file"], e["data"]["sha256"]) for e in self.ledger.events
                    if e["type"] == L.GUIDANCE_INJECTED}
        out = []
        gdir = self.root / GUIDANCE_DIR
        for f in sorted(gdir.iterdir()) if gdir.is_dir() else ():
            if f.is_file() and not f.name.startswith("."):
                text = f.read_text(encoding="utf-8")
                sha = hashlib.sha256(text.encode()).hexdigest()
                rel = f.relative_to(self.root).as_posix()
                if (rel, sha) not in consumed:
                    out.append((rel, sha, text))
        return out

    def latest_review(self) -> ReviewReport | None:
        r = self.ledger.view()["last_review"]
        return ReviewReport.from_json(r) if r else None

    def plan_cycle(self, review: ReviewReport | None = None) -> list[PlanTask]:
        if self.phase != PROVING:
            raise PhaseError(f"plan_cycle needs phase proving, not {self.phase}")
        cycle = self.ledger.view()["cycles"] + 1
        self.ledger.append(L.CYCLE, {"cycle": cycle})
        open_obls = self.state.open_obligations()
        if not open_obls:
            self._phase(POLISH, reason="no open obligations")
            return []
        guidance = self._new_guidance()
        if review and review.recommendation == REQUEST_GUIDANCE and not guidance:
            self.ledger.append(L.GUIDANCE_REQUEST, {
                "stalled": [o for o, _ in review.stalled_obligations],
                "hint": f"drop a document into {GUIDANCE_DIR}/ (archon guide FILE)"})
            return []
        groups = dependency_partition(self.state)
        materials = [
            ("Open obligations", "\n".join(f"{o.id} (attempts: {o.attempts})" for o in open_obls)),
            ("Dependency groups", "\n".join(f"{g.id}: files {', '.join(g.files)}; obligations "
                                            f"{', '.join(g.obligations)}" for g in groups)),
        ]
        if review is not None:
            materials.append(("Latest review", json.dumps(review.to_json(), sort_keys=True)))
        recent = [e["data"] for e in self.ledger.events if e["type"] == L.SESSION_SUMMARY][-5:]
        if recent:
            materials.append(("Recent sessions", "\n".join(
                f"{s['session_id']} {s['role']} {s['outcome']}: {s['summary']}" for s in recent)))
        for rel, _, text in guidance:
            materials.append((f"Guidance {rel}", text))
        task = PlanTask(f"plan-{cycle:03d}", budget=self.cfg.budgets.plan_tokens, materials=tuple(materials))
        sid = self._next_session_id()
        rec = self._session(PLAN, task, sid, self.state)
        before = dict(self.state.obligations)
        self._commit_plan(rec, before)
        for rel, sha, _ in guidance:
            self.ledger.append(L.GUIDANCE_INJECTED, {"file": rel, "sha256": sha, "session_id": sid})

        directive = DIRECTIVES.get(review.recommendation, "") if review else ""
        if rec.outcome == COMPLETED and rec.payload.get("revise"):
            text = str(rec.payload["revise"]) if rec.payload["revise"] is not True else ""
            return [PlanTask("revise", scope=("src/",), guidance="\n\n".join(x for x in (text, directive) if x),
                             budget=self.cfg.budgets.worker_tokens, parallel_group="revise",
                             materials=tuple(self._materials_for(self.state, ("src/",), ())))]
        tasks = self._tasks_from_plan(rec.payload if rec.outcome == COMPLETED else {}, groups, cycle)
        if not tasks:
            o = open_obls[0]
            tasks = [PlanTask(f"c{cycle:03d}-fallback", targets=(o.id,), scope=(o.path,),
                              budget=self.cfg.budgets.worker_tokens, parallel_group="fallback",
                              materials=tuple(self._materials_for(self.state, (o.path,), (o.id,))))]
        if directive:
            tasks = [PlanTask(t.id, t.targets, t.scope, "\n\n".join(x for x in (t.guidance, directive) if x),
                              t.constraints, t.budget, t.parallel_group, t.materials) for t in tasks]
        return tasks

    def _commit_plan(self, rec: SessionRecord, before) -> None:
        self.ledger.append(L.SESSION_SUMMARY, {
            "session_id": rec.id, "role": rec.role, "task_id": rec.task.id, "provider": self.provider_id,
            "targets": [], "scope": [],
            "outcome": rec.outcome, "summary": rec.summary, "tool_calls": len(rec.tool_calls),
            "tokens": rec.token_total, "edited": [], "closed": [], "signatures": {}, "diagnostics": [],
            "payload": rec.payload,
        })
        self._save_transcript(rec)

    def _tasks_from_plan(self, payload: dict, groups, cycle: int) -> list[PlanTask]:
        open_ids = {o.id for o in self.state.open_obligations()}
        group_of = {oid: g for g in groups for oid in g.obligations}
        merged: dict[str, dict] = {}
        for raw in payload.get("tasks", []) if isinstance(payload.get("tasks"), list) else []:
            if not isinstance(raw, dict):
                continue
            targets = [t for t in raw.get("targets", []) if t in open_ids]
            for t in targets:
                g = group_of[t]
                m = merged.setdefault(g.id, {"group": g, "targets": [], "guidance": [], "constraints": [],
                                             "scope": set()})
                if t not in m["targets"]:
                    m["targets"].append(t)
                m["scope"].add(t.rsplit("::", 1)[0])
                m["scope"].update(s for s in raw.get("scope", []) if s in g.files)
                for key in ("guidance", "constraints"):
                    if raw.get(key) and raw[key] not in m[key]:
                        m[key].append(str(raw[key]))
        tasks = []
        for gid in sorted(merged):
            m = merged[gid]
            targets = tuple(sorted(m["targets"]))
            scope = tuple(sorted(m["scope"]))
            tasks.append(PlanTask(f"c{cycle:03d}-{gid}", targets, scope, "\n\n".join(m["guidance"]),
                                  "\n\n".join(m["constraints"]), self.cfg.budgets.worker_tokens, gid,
                                  tuple(self._materials_for(self.state, scope, targets))))
        return tasks

    def prove_cycle(self, tasks: Sequence[PlanTask], schedule: Sequence[int] | None = None) -> list[SessionRecord]:
        """One worker session per task; ``schedule`` forces a sequential order (tests)."""
        scopes = [t.scope for t in tasks]
        for i in range(len(scopes)):
            for j in range(i + 1, len(scopes)):
                if any(a == b or (a.endswith("/") and b.startswith(a)) or (b.endswith("/") and a.startswith(b))
                       for a in scopes[i] for b in scopes[j]):
                    raise ValueError(f"tasks {tasks[i].id} and {tasks[j].id} have overlapping scopes")
        base = self.state
        before = dict(base.obligations)
        sids = [self._next_session_id() for _ in tasks]
        tokens = [self.tokens.issue(t.scope, sid) for t, sid in zip(tasks, sids)]

        def work(i: int) -> SessionRecord:
            return self._session(WORKER, tasks[i], sids[i], base, tokens[i])

        try:
            if schedule is not None:
                if sorted(schedule) != list(range(len(tasks))):
                    raise ValueError("schedule must be a permutation of task indices")
                done = {i: work(i) for i in schedule}
                records = [done[i] for i in range(len(tasks))]
            else:
                with ThreadPoolExecutor(max_workers=max(1, min(self.cfg.budgets.parallelism, len(tasks)))) as ex:
                    records = list(ex.map(work, range(len(tasks))))
        finally:
            for tok in tokens:
                self.tokens.release(tok)
        kept = []
        for rec in records:
            if rec.outcome == ABORTED and rec.edited:
                # a dropped connection leaves edits of unknown quality; put the files back
                sync_to_disk(base, rec.edited)
                rec.edited = ()
            kept.append(rec)
        self.state = self._merge(base, kept)
        sync_to_disk(self.state, sorted({p for r in kept for p in r.edited}))
        report = self._check()
        outcomes = {o: (r.id, r.outcome) for r in kept for o in r.task.targets}
        self._close_complete(report, outcomes)
        self._commit_sessions(kept, before, report)
        return kept

    def review(self, force: bool = False) -> ReviewReport | None:
        if not force and not sessions_since_review(self.ledger.events):
            return None
        versions = self.state.versions()
        b = self.cfg.budgets
        report = analyze(self.ledger.events, b.review_window, b.stall_threshold)
        if self.cfg.run.review_sessions:
            task = PlanTask("review", budget=b.review_tokens,
                            materials=(("Review report", json.dumps(report.to_json(), sort_keys=True)),))
            sid = self._next_session_id()
            rec = self._session(REVIEW, task, sid, self.state)
            self._commit_plan(rec, {})
        self.ledger.append(L.REVIEW_REPORT, report.to_json())
        assert self.state.versions() == versions, "review must not touch the workspace"
        return report

    def polish_cycle(self) -> gate.GateVerdict:
        if self.phase != POLISH:
            raise PhaseError(f"polish_cycle needs phase polish, not {self.phase}")
        if self.cfg.run.quality_pass and self.state.files:
            self._quality_pass()
        spec = None
        spec_path = self.root / self.cfg.paths.spec
        if spec_path.exists():
            spec = gate.load_spec(self.root, self.cfg.paths.spec)
        verdict = gate.verify(self.state, self.backend, spec, self.cfg.policy.gate_policy(), self.checker_config)
        stamp = f"v{self.ledger.position + 1:06d}"
        gate.persist_verdict(self.root, verdict, stamp)
        self.ledger.append(L.GATE_VERDICT, {"pass": verdict.passed, "failed_checks": verdict.failed_checks(),
                                            "hatch_hits": len(verdict.hatch_hits),
                                            "offending": [list(p) for p in verdict.offending],
                                            "spec_ok": verdict.spec_report.ok, "file": f"ledger/verdicts/{stamp}.json"})
        if verdict.passed:
            self._phase(DONE, reason="gate passed")
        else:
            self._reopen_from(verdict)
            self._phase(PROVING, reason="gate failed: " + ", ".join(verdict.failed_checks()))
        return verdict

    def _quality_pass(self) -> None:
        base = self.state
        before = dict(base.obligations)
        task = PlanTask("polish", scope=("src/",), budget=self.cfg.budgets.worker_tokens,
                        guidance="Quality pass: extract reusable lemmas, remove duplication, simplify proofs.",
                        constraints="Every edit must keep the build green, introduce no placeholders or "
                                    "axioms, and leave the specified statements unchanged.",
                        materials=tuple(self._materials_for(base, ("src/",), ())))
        sid = self._next_session_id()
        token = self.tokens.issue(task.scope, sid)
        try:
            rec = self._session(WORKER, task, sid, base, token)
        finally:
            self.tokens.release(token)
        merged = self._merge(base, [rec])
        self.state = merged
        report = self._check()
        reverted = bool(rec.edited) and not report.success
        if reverted:
            sync_to_disk(base, rec.edited)
            self.state = base
            report = self._check()
        self._commit_sessions([rec], before, report)
        if reverted:
            self.ledger.append(L.REFACTOR_EVENT, {"session_id": sid, "kind": "quality_reverted",
                                                  "files": list(rec.edited), "reason": "build broke"})
        elif rec.edited:
            self.ledger.append(L.REFACTOR_EVENT, {"session_id": sid, "kind": "quality",
                                                  "files": list(rec.edited)})

    def _reopen_from(self, verdict: gate.GateVerdict) -> None:
        st = self.state
        targets: set[tuple[str, str]] = set()
        for h in verdict.hatch_hits:
            d = _decl_at(st, h.file, h.span[0])
            if d is not None:
                targets.add((d.path, d.name))
        errs = verdict.report.errors() if verdict.report else []
        for e in errs:
            d = _decl_at(st, e.file, e.span[0]) if e.file in st.files else None
            if d is not None:
                targets.add((d.path, d.name))
        names = {n for n, *_ in verdict.spec_report.mismatched} | {n for n, _ in verdict.offending}
        for (path, name) in st.declarations:
            if name in names:
                targets.add((path, name))
        before = dict(st.obligations)
        obls = dict(before)
        for path, name in sorted(targets):
            oid = f"{path}::{name}"
            o = obls.get(oid)
            if o is None:
                obls[oid] = Obligation(oid, OPEN, 0, (("gate", "reopened"),))
            elif o.status != OPEN:
                obls[oid] = Obligation(oid, OPEN, o.attempts, o.history + (("gate", "reopened"),))
        self.state = st.with_obligations(obls)
        self._log_obligation_diff(before, self.state.obligations, reason="gate_fail")

    # -- driver -------------------------------------------------------------------

    def make_checkpoint(self, cp_id: str) -> Checkpoint:
        cp = take_checkpoint(self.root, self.state, self.ledger, cp_id, self.ledger.clock())
        return cp

    def run(self, pause_after: int | None = None) -> str:
        """Drive the workflow to done/failed, or pause after ``pause_after`` plan cycles."""
        lock = filelock.FileLock(str(self.root / LOCK_FILE), timeout=0)
        try:
            lock.acquire()
        except filelock.Timeout:
            raise WorkspaceBusy(f"another run holds {LOCK_FILE}") from None
        try:
            return self._run(pause_after)
        finally:
            lock.release()

    def _run(self, pause_after: int | None) -> str:
        if self.ledger.position == 0:
            if not (self.root / "checkpoints" / "initial").exists():
                self.make_checkpoint("initial")
            self.ledger.append(L.CHECKPOINT, {"id": "initial", "ledger_position": 0})
            self._phase(SCAFFOLDING)
        cap = self.cfg.budgets.iteration_cap
        cycles_this_run = 0
        scaffold_tries = 0
        while True:
            phase = self.phase
            if phase in (DONE, FAILED):
                return phase
            if phase == SCAFFOLDING:
                if scaffold_tries >= cap:
                    self._phase(FAILED, reason="scaffolding never completed")
                    continue
                scaffold_tries += 1
                self.scaffold()
            elif phase == PROVING:
                if self.ledger.view()["cycles"] >= cap:
                    final = self.review(force=True) or self.latest_review()
                    self._phase(FAILED, reason="iteration cap reached",
                                review=final.to_json() if final else None)
                    continue
                if pause_after is not None and cycles_this_run >= pause_after:
                    return phase
                cycles_this_run += 1
                tasks = self.plan_cycle(self.latest_review())
                if tasks:
                    self.prove_cycle(tasks)
                    self.review()
                elif self.ledger.events[-1]["type"] == L.GUIDANCE_REQUEST:
                    return PROVING  # paused until someone drops guidance and resumes
            elif phase == POLISH:
                if self.ledger.view()["cycles"] >= cap:
                    self._phase(FAILED, reason="iteration cap reached")
                    continue
                self.polish_cycle()
