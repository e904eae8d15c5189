"""Workspace checkpoints under ``checkpoints/<id>/``.

A checkpoint holds copies of the source tree, spec, routes, references,
project skills, config and the whole ``ledger/`` directory, plus the
serialized ProjectState. Restoring validates the snapshot before touching
the destination.
"""

from __future__ import annotations

import json
import re
import shutil
from dataclasses import dataclass
from pathlib import Path

from ..workspace import ProjectState, atomic_write
from .ledger import EVENTS_FILE, StatusLedger, read_events

COPIED = ("src", "spec", "references", "routes", ".archon", "ledger", "archon.toml")
_SKIP = ("run.lock",)


class CheckpointError(Exception):
    pass


@dataclass(frozen=True)
class Checkpoint:
    id: str
    path: Path
    ledger_position: int
    created: str

    def to_json(self) -> dict:
        return {"id": self.id, "ledger_position": self.ledger_position, "created": self.created}


def _copy(src: Path, dest: Path) -> None:
    if src.is_dir():
        shutil.copytree(src, dest, ignore=shutil.ignore_patterns(*_SKIP))
    elif src.is_file():
        shutil.copy2(src, dest)


def checkpoint(root, state: ProjectState, ledger: StatusLedger, cp_id: str, created: str = "") -> Checkpoint:
    """Snapshot the workspace. Callers must be quiescent (no live sessions)."""
    root = Path(root)
    if not re.fullmatch(r"[A-Za-z0-9_.-]+", cp_id):
        raise CheckpointError(f"bad checkpoint id {cp_id!r}")
    final = root / "checkpoints" / cp_id
    if final.exists():
        raise CheckpointError(f"checkpoint {cp_id} already exists")
    tmp = root / "checkpoints" / f".{cp_id}.tmp"
    if tmp.exists():
        shutil.rmtree(tmp)
    (tmp / "workspace").mkdir(parents=True)
    for name in COPIED:
        _copy(root / name, tmp / "workspace" / name)
    data = state.to_json()
    data["root"] = "."
    atomic_write(tmp / "state.json", json.dumps(data, indent=1, sort_keys=True) + "\n")
    cp = Checkpoint(cp_id, final, ledger.position, created)
    atomic_write(tmp / "meta.json", json.dumps(cp.to_json(), indent=2, sort_keys=True) + "\n")
    tmp.rename(final)
    return cp


def load_checkpoint(root, cp_id: str) -> Checkpoint:
    path = Path(root) / "checkpoints" / cp_id
    meta = path / "meta.json"
    if not meta.is_file():
        raise CheckpointError(f"checkpoint {cp_id} not found under {path.parent}")
    d = json.loads(meta.read_text(encoding="utf-8"))
    return Checkpoint(d["id"], path, d["ledger_position"], d["created"])


def _validate(cp: Checkpoint) -> dict:
    ws = cp.path / "workspace"
    needed = [cp.path / "meta.json", cp.path / "state.json", ws / "src", ws / "archon.toml"]
    missing = [str(p) for p in needed if not p.exists()]
    if missing:
        raise CheckpointError("incomplete checkpoint snapshot, missing: " + ", ".join(missing))
    events = read_events(ws / "ledger" / EVENTS_FILE)
    if len(events) != cp.ledger_position:
        raise CheckpointError(f"checkpoint ledger has {len(events)} events, expected {cp.ledger_position}")
    try:
        return json.loads((cp.path / "state.json").read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"corrupt state.json: {exc}") from exc


def restore(cp: Checkpoint, dest, replay: bool = False) -> tuple[ProjectState, StatusLedger]:
    """Make ``dest`` look exactly like the workspace at checkpoint time.

    ``dest`` may be the original root or a fresh directory (a branch). The
    ``checkpoints/`` directory of ``dest`` is left alone.
    """
    data = _validate(cp)
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    staging = dest / ".archon-restore.tmp"
    if staging.exists():
        shutil.rmtree(staging)
    shutil.copytree(cp.path / "workspace", staging)
    try:
        for name in COPIED:
            target = dest / name
            if target.is_dir():
                if name == ".archon":
                    # keep the live lock file, replace everything else
                    for child in target.iterdir():
                        if child.name not in _SKIP:
                            shutil.rmtree(child) if child.is_dir() else child.unlink()
                else:
                    shutil.rmtree(target)
            elif target.exists():
                target.unlink()
            staged = staging / name
            if not staged.exists():
                continue
            if name == ".archon" and target.is_dir():
                for child in staged.iterdir():
                    child.rename(target / child.name)
            else:
                staged.rename(target)
        for d in ("checkpoints", "references", "routes", "spec"):
            (dest / d).mkdir(exist_ok=True)
    finally:
        shutil.rmtree(staging, ignore_errors=True)
    state = ProjectState.from_json(data, root=str(dest))
    return state, StatusLedger(dest, replay=replay)
