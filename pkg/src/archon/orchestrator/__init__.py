from .checkpoint import Checkpoint, CheckpointError, checkpoint, load_checkpoint, restore
from .engine import DONE, FAILED, PHASES, POLISH, PROVING, SCAFFOLDING, Orchestrator, PhaseError, WorkspaceBusy
from .ledger import StatusLedger, fold, read_events
from .review import LADDER, ReviewReport, analyze, review_cycle

__all__ = [
    "Checkpoint", "CheckpointError", "checkpoint", "load_checkpoint", "restore",
    "DONE", "FAILED", "PHASES", "POLISH", "PROVING", "SCAFFOLDING", "Orchestrator", "PhaseError",
    "WorkspaceBusy", "StatusLedger", "fold", "read_events", "LADDER", "ReviewReport", "analyze",
    "review_cycle",
]
