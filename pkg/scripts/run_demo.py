#!/usr/bin/env python3
"""End-to-end demo on the bundled toy workspace.

Initializes a fresh workspace, runs the scripted workflow to completion,
prints the obligation table and gate verdict, then replays the run from its
initial checkpoint and confirms the ledger is reproduced.

    python scripts/run_demo.py [--keep DIR]
"""

from __future__ import annotations

import argparse
import shutil
import tempfile
import time
from pathlib import Path

from archon.cli import init_workspace, replay_run, status_view
from archon.config import load_config, with_overrides
from archon.orchestrator import Orchestrator


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--keep", type=Path, help="build the workspace here and leave it in place")
    args = ap.parse_args()

    root = args.keep or Path(tempfile.mkdtemp(prefix="archon-demo-")) / "ws"
    try:
        init_workspace(root, "toy-anderson")
        cfg = with_overrides(load_config(root), run={"replay": True})
        started = time.perf_counter()
        phase = Orchestrator(root, cfg).run()
        elapsed = time.perf_counter() - started

        view = status_view(root)
        print(f"phase {phase} after {view['cycles']} cycle(s), {view['sessions']} session(s), {elapsed:.2f}s")
        for oid, o in view["obligations"].items():
            print(f"  {o['status']:<7} {oid}")
        verdict = view["last_verdict"] or {}
        print(f"gate: {'pass' if verdict.get('pass') else 'fail'} {verdict.get('failed_checks', [])}")

        same, first = replay_run(root)
        print("replay: ledger identical" if same else f"replay: ledger differs at event {first + 1}")
        return 0 if phase == "done" and same else 1
    finally:
        if args.keep is None:
            shutil.rmtree(root.parent, ignore_errors=True)


if __name__ == "__main__":
    raise SystemExit(main())
