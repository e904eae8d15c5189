"""Trend analysis over recent worker sessions.

Stall rule: an obligation is stalled once ``threshold`` consecutive sessions
targeted it without closing it and without producing a diagnostic signature
not already seen in that streak. A fresh signature restarts the streak at 1
and a closure clears it.

Recommendations climb one rung per consecutive stalled review:
continue, revise_decomposition, escalate_informal, request_guidance. Injected
guidance resets the ladder.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .ledger import GUIDANCE_INJECTED, REVIEW_REPORT, SESSION_SUMMARY, StatusLedger

CONTINUE = "continue"
REVISE_DECOMPOSITION = "revise_decomposition"
ESCALATE_INFORMAL = "escalate_informal"
REQUEST_GUIDANCE = "request_guidance"
LADDER = (CONTINUE, REVISE_DECOMPOSITION, ESCALATE_INFORMAL, REQUEST_GUIDANCE)


@dataclass(frozen=True)
class ReviewReport:
    window: tuple[str, str] | None
    closed_in_window: int
    reopened: int
    stalled_obligations: tuple[tuple[str, int], ...] = ()
    recommendation: str = CONTINUE
    sessions: int = 0
    notes: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.stalled_obligations and self.recommendation == CONTINUE:
            raise ValueError("a stalled window cannot recommend continue")

    @property
    def stalled(self) -> bool:
        return bool(self.stalled_obligations)

    def to_json(self) -> dict:
        return {
            "window": list(self.window) if self.window else None,
            "closed_in_window": self.closed_in_window,
            "reopened": self.reopened,
            "stalled_obligations": [list(s) for s in self.stalled_obligations],
            "recommendation": self.recommendation,
            "sessions": self.sessions,
            "notes": list(self.notes),
        }

    @classmethod
    def from_json(cls, d: dict) -> "ReviewReport":
        return cls(tuple(d["window"]) if d.get("window") else None, d["closed_in_window"], d["reopened"],
                   tuple((o, n) for o, n in d["stalled_obligations"]), d["recommendation"],
                   d.get("sessions", 0), tuple(d.get("notes", ())))


def _worker_sessions(events) -> list[dict]:
    return [e for e in events if e["type"] == SESSION_SUMMARY and e["data"].get("role") == "worker"]


def streaks(sessions: list[dict]) -> dict[str, int]:
    """Current no-progress streak per targeted obligation, oldest session first."""
    streak: dict[str, int] = {}
    seen: dict[str, set] = {}
    for e in sessions:
        d = e["data"]
        closed = set(d.get("closed", ()))
        sigs = d.get("signatures", {})
        for o in d.get("targets", ()):
            if o in closed:
                streak[o] = 0
                seen[o] = set()
                continue
            sig = sigs.get(o)
            if sig in seen.setdefault(o, set()):
                streak[o] = streak.get(o, 0) + 1
            else:
                streak[o] = 1
                seen[o] = {sig}
    return streak


def _prior_stalled_reviews(events) -> int:
    """Consecutive stalled reviews at the end of the log, since the last guidance injection."""
    n = 0
    for e in reversed(events):
        if e["type"] == GUIDANCE_INJECTED:
            break
        if e["type"] == REVIEW_REPORT:
            if not e["data"]["stalled_obligations"]:
                break
            n += 1
    return n


def analyze(events, window_size: int = 6, stall_threshold: int = 3) -> ReviewReport:
    """Pure: the report for the last ``window_size`` worker sessions in ``events``."""
    if window_size < 1 or stall_threshold < 1:
        raise ValueError("window_size and stall_threshold must be positive")
    window = _worker_sessions(events)[-window_size:]
    if not window:
        return ReviewReport(None, 0, 0)
    first_seq = window[0]["seq"]
    closed = sum(len(e["data"].get("closed", ())) for e in window)
    reopened = sum(1 for e in events if e["seq"] >= first_seq and e["type"] == "obligation_event"
                   and e["data"].get("event") == "reopened")
    current = streaks(window)
    stalled = tuple(sorted((o, n) for o, n in current.items() if n >= stall_threshold))
    rung = 0
    if stalled:
        rung = min(len(LADDER) - 1, 1 + _prior_stalled_reviews(events))
    ids = (window[0]["data"]["session_id"], window[-1]["data"]["session_id"])
    notes = tuple(f"{o}: {n} consecutive sessions without progress" for o, n in stalled)
    return ReviewReport(ids, closed, reopened, stalled, LADDER[rung], len(window), notes)


def review_cycle(ledger: StatusLedger, window_size: int = 6, stall_threshold: int = 3) -> ReviewReport:
    """Analyze the ledger and append the report. Touches nothing outside ``ledger/``."""
    report = analyze(ledger.events, window_size, stall_threshold)
    ledger.append(REVIEW_REPORT, report.to_json())
    return report


def sessions_since_review(events) -> int:
    n = 0
    for e in reversed(events):
        if e["type"] == REVIEW_REPORT:
            break
        if e["type"] == SESSION_SUMMARY and e["data"].get("role") == "worker":
            n += 1
    return n
