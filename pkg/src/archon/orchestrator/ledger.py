"""Append-only status ledger (``ledger/events.ndjson``) and its derived views.

Every event is one JSON line ``{"seq", "ts", "type", "data"}``. Views such as
the current phase or per-obligation history are recomputed by :func:`fold`
and mirrored to ``ledger/status.json`` after each append; that snapshot is
written by rename so concurrent readers never see a torn file.

In replay mode ``ts`` is a logical counter instead of wall-clock time.
"""

from __future__ import annotations

import datetime as _dt
import json
import os
import threading
from pathlib import Path

from ..workspace import CLOSED, OPEN, Obligation, atomic_write

EVENTS_FILE = "events.ndjson"
STATUS_FILE = "status.json"

PHASE_CHANGE = "phase_change"
SESSION_SUMMARY = "session_summary"
OBLIGATION_EVENT = "obligation_event"
REFACTOR_EVENT = "refactor_event"
REVIEW_REPORT = "review_report"
GATE_VERDICT = "gate_verdict"
CHECK_SUMMARY = "check_summary"
CYCLE = "cycle"
GUIDANCE_REQUEST = "guidance_request"
GUIDANCE_INJECTED = "guidance_injected"
CHECKPOINT = "checkpoint"

EVENT_TYPES = frozenset({
    PHASE_CHANGE, SESSION_SUMMARY, OBLIGATION_EVENT, REFACTOR_EVENT, REVIEW_REPORT, GATE_VERDICT,
    CHECK_SUMMARY, CYCLE, GUIDANCE_REQUEST, GUIDANCE_INJECTED, CHECKPOINT,
})


class LedgerError(Exception):
    pass


def encode(event: dict) -> str:
    return json.dumps(event, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def read_events(path) -> list[dict]:
    p = Path(path)
    if not p.exists():
        return []
    out = []
    with open(p, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            if not line.endswith("\n"):
                # a crash mid-append leaves a partial final line; it never happened
                break
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise LedgerError(f"{p}:{n}: corrupt ledger line: {exc}") from exc
    return out


class StatusLedger:
    """The event log of one workspace. Appends are serialized by a lock."""

    def __init__(self, root, replay: bool = False):
        self.root = Path(root)
        self.dir = self.root / "ledger"
        self.path = self.dir / EVENTS_FILE
        self.replay = replay
        self._lock = threading.Lock()
        self._events = read_events(self.path)
        self._trim_partial_tail()

    def _trim_partial_tail(self) -> None:
        if not self.path.exists():
            return
        raw = self.path.read_bytes()
        if raw and not raw.endswith(b"\n"):
            cut = raw.rfind(b"\n") + 1
            with open(self.path, "r+b") as fh:
                fh.truncate(cut)

    @property
    def events(self) -> list[dict]:
        return list(self._events)

    @property
    def position(self) -> int:
        return len(self._events)

    def _stamp(self, seq: int) -> str:
        if self.replay:
            return f"L{seq:06d}"
        return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="milliseconds")

    def append(self, type_: str, data: dict) -> dict:
        if type_ not in EVENT_TYPES:
            raise LedgerError(f"unknown event type {type_!r}")
        with self._lock:
            seq = len(self._events) + 1
            event = {"seq": seq, "ts": self._stamp(seq), "type": type_, "data": data}
            line = encode(event) + "\n"
            self.dir.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8", newline="") as fh:
                fh.write(line)
                fh.flush()
                os.fsync(fh.fileno())
            self._events.append(json.loads(line))
            self.write_snapshot()
            return event

    def write_snapshot(self) -> None:
        atomic_write(self.dir / STATUS_FILE, json.dumps(fold(self._events), indent=2, sort_keys=True) + "\n")

    def view(self) -> dict:
        return fold(self._events)

    def since(self, seq: int) -> list[dict]:
        return [e for e in self._events if e["seq"] > seq]

    def last(self, type_: str) -> dict | None:
        for e in reversed(self._events):
            if e["type"] == type_:
                return e
        return None

    def clock(self) -> str:
        """Timestamp for artifacts produced between appends."""
        return self._stamp(len(self._events))


def obligations_from(events) -> dict[str, Obligation]:
    """Replay obligation events into Obligation values."""
    out: dict[str, Obligation] = {}
    for e in events:
        if e["type"] != OBLIGATION_EVENT:
            continue
        d = e["data"]
        o = out.get(d["obligation"], Obligation(d["obligation"]))
        history = o.history + tuple(tuple(r) for r in d.get("records", []))
        out[d["obligation"]] = Obligation(o.id, d["status"], o.attempts + len(d.get("records", [])), history)
    return dict(sorted(out.items()))


def fold(events) -> dict:
    """Derived views: phase, per-file and per-obligation status, last review, last verdict."""
    phase = None
    sessions = 0
    cycles = 0
    last_review = None
    last_verdict = None
    last_check = None
    pending_guidance_request = False
    for e in events:
        t, d = e["type"], e["data"]
        if t == PHASE_CHANGE:
            phase = d["to"]
        elif t == SESSION_SUMMARY:
            sessions += 1
        elif t == CYCLE:
            cycles += 1
        elif t == REVIEW_REPORT:
            last_review = d
        elif t == GATE_VERDICT:
            last_verdict = d
        elif t == CHECK_SUMMARY:
            last_check = d
        elif t == GUIDANCE_REQUEST:
            pending_guidance_request = True
        elif t == GUIDANCE_INJECTED:
            pending_guidance_request = False
    obligations = obligations_from(events)
    files: dict[str, dict] = {}
    for o in obligations.values():
        f = files.setdefault(o.path, {"open": 0, "closed": 0, "other": 0, "errors": 0})
        key = "open" if o.status == OPEN else "closed" if o.status == CLOSED else "other"
        f[key] += 1
    if last_check:
        for path, n in last_check.get("errors_by_file", {}).items():
            files.setdefault(path, {"open": 0, "closed": 0, "other": 0, "errors": 0})["errors"] = n
    return {
        "phase": phase,
        "events": len(events),
        "sessions": sessions,
        "cycles": cycles,
        "open_obligations": sorted(o.id for o in obligations.values() if o.status == OPEN),
        "obligations": {o.id: {"status": o.status, "attempts": o.attempts,
                               "history": [list(h) for h in o.history]} for o in obligations.values()},
        "files": dict(sorted(files.items())),
        "last_review": last_review,
        "last_verdict": last_verdict,
        "guidance_requested": pending_guidance_request,
    }
