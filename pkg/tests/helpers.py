"""Shared test utilities: fixture workspaces, scripted runs, small builders."""

from __future__ import annotations

import json
import shutil
from pathlib import Path

from archon.cli import init_workspace
from archon.config import Config, load_config, with_overrides
from archon.orchestrator import Orchestrator

FIXTURES = Path(__file__).parent / "fixtures"


def copy_fixture(name: str, dest: Path) -> Path:
    shutil.copytree(FIXTURES / name, dest)
    return dest


def toy_workspace(dest: Path) -> Path:
    init_workspace(dest, "toy-anderson")
    return dest


def write_script(root: Path, script: dict) -> None:
    p = Path(root) / ".archon" / "script.json"
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(script, indent=1), encoding="utf-8")


def load_script(root: Path) -> dict:
    return json.loads((Path(root) / ".archon" / "script.json").read_text(encoding="utf-8"))


def config_for(root: Path, **sections) -> Config:
    cfg = load_config(root)
    sections.setdefault("run", {})
    sections["run"] = {"replay": True, **sections["run"]}
    return with_overrides(cfg, **sections)


def orchestrator(root: Path, **sections) -> Orchestrator:
    return Orchestrator(root, config_for(root, **sections))


def call(tool: str, **args) -> dict:
    return {"tool": tool, "args": args}


def summary(text: str = "done", **extra) -> dict:
    return call("write_summary", summary=text, **extra)


def events(root: Path, type_: str | None = None) -> list[dict]:
    from archon.orchestrator.ledger import read_events
    evs = read_events(Path(root) / "ledger" / "events.ndjson")
    return [e for e in evs if type_ is None or e["type"] == type_]


def write_src(root: Path, files: dict[str, str]) -> None:
    for rel, text in files.items():
        p = Path(root) / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text, encoding="utf-8")
