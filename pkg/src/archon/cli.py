"""``archon`` command line.

Exit codes (stable):
  0  success / gate pass / ledger identical
  1  gate failed, run ended failed or paused, replay diverged
  2  configuration or usage error (bad archon.toml, missing workspace, non-empty init root)
  3  infrastructure error (workspace lock held, I/O, provider transport, corrupt checkpoint or ledger)
"""

from __future__ import annotations

import datetime as _dt
import json
import logging
import shutil
import sys
import tempfile
from importlib import resources
from pathlib import Path

import click
import filelock

from . import gate
from .agents.providers import TransportError
from .agents.references import IngestError, ingest_reference
from .checker import CheckerConfig
from .config import CONFIG_FILE, DEFAULT_TOML, ConfigError, load_config, with_overrides
from .orchestrator.checkpoint import CheckpointError, load_checkpoint, restore
from .orchestrator.engine import DONE, GUIDANCE_DIR, LOCK_FILE, Orchestrator, WorkspaceBusy
from .orchestrator.ledger import EVENTS_FILE, LedgerError, fold, read_events
from .workspace import LAYOUT_DIRS, atomic_write, scan_project

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_INFRA = 0, 1, 2, 3
TEMPLATES = ("toy-anderson",)


class CliFailure(click.ClickException):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.exit_code = code


def _emit(as_json: bool, payload: dict, text: str) -> None:
    click.echo(json.dumps(payload, indent=2, sort_keys=True) if as_json else text)


def _config(root: Path):
    if not root.is_dir():
        raise CliFailure(f"workspace {root} does not exist", EXIT_CONFIG)
    try:
        return load_config(root)
    except ConfigError as exc:
        raise CliFailure(str(exc), EXIT_CONFIG) from exc


def _infra(exc: Exception) -> CliFailure:
    return CliFailure(f"{type(exc).__name__}: {exc}", EXIT_INFRA)


_INFRA_ERRORS = (WorkspaceBusy, OSError, TransportError, CheckpointError, LedgerError, IngestError,
                 filelock.Timeout)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose: bool) -> None:
    """Drive a proof project from an informal proof to a gated artifact."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")


root_option = click.option("--root", type=click.Path(file_okay=False, path_type=Path), default=Path("."),
                           show_default=True, help="Workspace root.")
json_option = click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")


# -- init -----------------------------------------------------------------------------


def _copy_template(name: str, root: Path) -> None:
    base = resources.files("archon") / "templates" / name
    with resources.as_file(base) as src:
        for p in sorted(Path(src).rglob("*")):
            if p.is_dir() or "__pycache__" in p.parts:
                continue
            rel = p.relative_to(src)
            if rel.parts[0] == "scaffold":
                continue  # reference copy for the script generator, not workspace content
            dest = root / rel
            dest.parent.mkdir(parents=True, exist_ok=True)
            shutil.copyfile(p, dest)


def init_workspace(root: Path, template: str | None = None, force: bool = False) -> None:
    root = Path(root)
    if root.exists() and any(root.iterdir()) and not force:
        raise CliFailure(f"{root} is not empty (use --force to initialize anyway)", EXIT_CONFIG)
    if template is not None and template not in TEMPLATES:
        raise CliFailure(f"unknown template {template!r}; available: {', '.join(TEMPLATES)}", EXIT_CONFIG)
    for d in LAYOUT_DIRS:
        (root / d).mkdir(parents=True, exist_ok=True)
    (root / ".archon" / "skills").mkdir(parents=True, exist_ok=True)
    skills = resources.files("archon") / "skills"
    for f in skills.iterdir():
        if f.name.endswith(".md"):
            (root / ".archon" / "skills" / f.name).write_text(f.read_text(encoding="utf-8"), encoding="utf-8")
    atomic_write(root / CONFIG_FILE, DEFAULT_TOML)
    if template:
        _copy_template(template, root)


@main.command()
@click.argument("root", type=click.Path(file_okay=False, path_type=Path), default=Path("."))
@click.option("--template", type=click.Choice(TEMPLATES), default=None, help="Install a bundled fixture.")
@click.option("--force", is_flag=True, help="Initialize even if ROOT is not empty.")
def init(root: Path, template: str | None, force: bool) -> None:
    """Create the workspace skeleton, default config and starter skills."""
    try:
        init_workspace(root, template, force)
    except OSError as exc:
        raise _infra(exc) from exc
    click.echo(f"initialized {root}" + (f" from template {template}" if template else ""))


# -- run / resume ---------------------------------------------------------------------


def _drive(root: Path, as_json: bool, pause_after: int | None, replay: bool, resume: bool) -> None:
    cfg = _config(root)
    if replay:
        cfg = with_overrides(cfg, run={"replay": True})
    try:
        if resume:
            prior = fold(read_events(root / "ledger" / EVENTS_FILE))
            if not prior["events"]:
                raise CliFailure("nothing to resume: the ledger is empty", EXIT_CONFIG)
            if prior["phase"] in (DONE, "failed"):
                raise CliFailure(f"run already finished in phase {prior['phase']}", EXIT_CONFIG)
        orch = Orchestrator(root, cfg)
        phase = orch.run(pause_after=pause_after)
    except _INFRA_ERRORS as exc:
        raise _infra(exc) from exc
    except (json.JSONDecodeError, ValueError) as exc:
        raise CliFailure(f"bad provider script or configuration: {exc}", EXIT_CONFIG) from exc
    view = orch.ledger.view()
    payload = {"phase": phase, "open_obligations": view["open_obligations"], "cycles": view["cycles"],
               "sessions": view["sessions"], "last_verdict": view["last_verdict"],
               "guidance_requested": view["guidance_requested"]}
    text = f"phase: {phase}\nopen obligations: {len(view['open_obligations'])}\ncycles: {view['cycles']}"
    if view["guidance_requested"]:
        text += "\nwaiting for guidance: drop a document with `archon guide FILE`, then `archon resume`"
    _emit(as_json, payload, text)
    if phase != DONE:
        sys.exit(EXIT_FAIL)


@main.command()
@root_option
@json_option
@click.option("--pause-after", type=int, default=None, help="Stop after N plan cycles (for checkpointing).")
@click.option("--replay", is_flag=True, help="Logical timestamps in the ledger.")
def run(root: Path, as_json: bool, pause_after: int | None, replay: bool) -> None:
    """Run the orchestrator until done, failed, or paused."""
    _drive(root, as_json, pause_after, replay, resume=False)


@main.command()
@root_option
@json_option
@click.option("--pause-after", type=int, default=None, help="Stop after N more plan cycles.")
@click.option("--replay", is_flag=True, help="Logical timestamps in the ledger.")
def resume(root: Path, as_json: bool, pause_after: int | None, replay: bool) -> None:
    """Continue an interrupted or paused run from its ledger."""
    _drive(root, as_json, pause_after, replay, resume=True)


# -- status ---------------------------------------------------------------------------


def status_view(root: Path) -> dict:
    """Derived views computed from ``ledger/events.ndjson`` alone."""
    view = fold(read_events(Path(root) / "ledger" / EVENTS_FILE))
    view["phase"] = view["phase"] or "uninitialized"
    return view


@main.command()
@root_option
@json_option
def status(root: Path, as_json: bool) -> None:
    """Phase, per-file and per-obligation status, last review (from the ledger only)."""
    try:
        view = status_view(root)
    except (OSError, LedgerError) as exc:
        raise _infra(exc) from exc
    lines = [f"phase: {view['phase']}", f"cycles: {view['cycles']}  sessions: {view['sessions']}",
             f"open obligations: {len(view['open_obligations'])}"]
    for path, f in view["files"].items():
        lines.append(f"  {path}: {f['open']} open, {f['closed']} closed, {f['errors']} error(s)")
    for oid, o in view["obligations"].items():
        lines.append(f"  {o['status']:<8} {oid} (attempts {o['attempts']})")
    if view["last_review"]:
        r = view["last_review"]
        lines.append(f"last review: {r['recommendation']}, stalled {[s[0] for s in r['stalled_obligations']]}")
    _emit(as_json, view, "\n".join(lines))


# -- verify ---------------------------------------------------------------------------


@main.command()
@root_option
@json_option
def verify(root: Path, as_json: bool) -> None:
    """Run the verification gate on the current sources; exit 0 iff it passes."""
    cfg = _config(root)
    try:
        state = scan_project(root)
        spec = gate.load_spec(root, cfg.paths.spec) if (root / cfg.paths.spec).exists() else None
        verdict = gate.verify(state, cfg.backend.kind, spec, cfg.policy.gate_policy(),
                              _checker_config(cfg))
    except OSError as exc:
        raise _infra(exc) from exc
    except ValueError as exc:
        raise CliFailure(str(exc), EXIT_CONFIG) from exc
    payload = verdict.to_json()
    payload["failed_checks"] = verdict.failed_checks()
    lines = [f"gate: {'PASS' if verdict.passed else 'FAIL'}"]
    for name, ok in (("build", verdict.build_ok), ("escape hatches", not verdict.hatch_hits),
                     ("axiom footprint", verdict.footprint_ok), ("statement match", verdict.spec_report.ok)):
        lines.append(f"  {name}: {'ok' if ok else 'FAILED'}")
    for h in verdict.hatch_hits:
        lines.append(f"    {h.file}:{h.span[0]}:{h.span[1]} {h.token} ({h.category})")
    for decl, ax in verdict.offending:
        lines.append(f"    {decl} depends on {ax}")
    for name, _, _, idx in verdict.spec_report.mismatched:
        lines.append(f"    {name}: statement differs at token {idx}")
    for name in verdict.spec_report.missing:
        lines.append(f"    {name}: missing from the project")
    for d in verdict.errors + (verdict.report.errors() if verdict.report else []):
        lines.append(f"    {d.render()}")
    _emit(as_json, payload, "\n".join(lines))
    if not verdict.passed:
        sys.exit(EXIT_FAIL)


def _checker_config(cfg) -> CheckerConfig:
    return CheckerConfig(cfg.backend.command, cfg.backend.timeout)


# -- replay ---------------------------------------------------------------------------


def normalized_ledger(path: Path) -> list[str]:
    """Ledger lines with timestamps replaced by their sequence number."""
    out = []
    for e in read_events(path):
        e = dict(e, ts=f"L{e['seq']:06d}")
        out.append(json.dumps(e, sort_keys=True, ensure_ascii=False, separators=(",", ":")))
    return out


def replay_run(root: Path, checkpoint_id: str = "initial", keep: Path | None = None) -> tuple[bool, int | None]:
    """Re-run from a checkpoint in a scratch copy and compare ledgers.

    Returns (identical, index of the first differing event or None).
    """
    root = Path(root)
    cp = load_checkpoint(root, checkpoint_id)
    recorded = normalized_ledger(root / "ledger" / EVENTS_FILE)
    scratch_parent = Path(tempfile.mkdtemp(prefix="archon-replay-"))
    scratch = keep or scratch_parent / "ws"
    try:
        restore(cp, scratch, replay=True)
        cfg = with_overrides(load_config(scratch), run={"replay": True})
        Orchestrator(scratch, cfg).run()
        fresh = normalized_ledger(scratch / "ledger" / EVENTS_FILE)
    finally:
        shutil.rmtree(scratch_parent, ignore_errors=True)
    if fresh == recorded:
        return True, None
    first = next((i for i, (a, b) in enumerate(zip(fresh, recorded)) if a != b), min(len(fresh), len(recorded)))
    return False, first


@main.command()
@root_option
@json_option
@click.option("--checkpoint", "checkpoint_id", default="initial", show_default=True)
def replay(root: Path, as_json: bool, checkpoint_id: str) -> None:
    """Re-execute the recorded run in a scratch copy and assert the ledger is identical."""
    _config(root)
    try:
        same, first = replay_run(root, checkpoint_id)
    except _INFRA_ERRORS as exc:
        raise _infra(exc) from exc
    except ConfigError as exc:
        raise CliFailure(str(exc), EXIT_CONFIG) from exc
    _emit(as_json, {"identical": same, "first_difference": first},
          "ledger identical" if same else f"ledger differs at event {first + 1}")
    if not same:
        sys.exit(EXIT_FAIL)


# -- ingest / guide -------------------------------------------------------------------


def _workspace_lock(root: Path) -> filelock.FileLock:
    (root / ".archon").mkdir(exist_ok=True)
    return filelock.FileLock(str(root / LOCK_FILE), timeout=0)


@main.command()
@root_option
@json_option
@click.argument("source")
def ingest(root: Path, as_json: bool, source: str) -> None:
    """Store a reference document (path or URL) under references/."""
    _config(root)
    try:
        with _workspace_lock(root):
            doc = ingest_reference(source, root / "references",
                                   lambda: _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"))
    except _INFRA_ERRORS as exc:
        raise _infra(exc) from exc
    _emit(as_json, {"title": doc.title, "path": doc.path, "source": doc.source, "sha256": doc.sha256},
          f"references/{doc.path}: {doc.title}")


@main.command()
@root_option
@json_option
@click.argument("document", type=click.Path(exists=True, dir_okay=False, path_type=Path))
def guide(root: Path, as_json: bool, document: Path) -> None:
    """Drop a guidance document into routes/guidance/ for the next plan session."""
    _config(root)
    dest = root / GUIDANCE_DIR / document.name
    try:
        with _workspace_lock(root):
            dest.parent.mkdir(parents=True, exist_ok=True)
            atomic_write(dest, document.read_text(encoding="utf-8"))
    except _INFRA_ERRORS as exc:
        raise _infra(exc) from exc
    rel = dest.relative_to(root).as_posix()
    _emit(as_json, {"path": rel}, f"guidance queued at {rel}")


# -- checkpoints ----------------------------------------------------------------------


@main.command("checkpoint")
@root_option
@json_option
@click.argument("checkpoint_id")
def checkpoint_cmd(root: Path, as_json: bool, checkpoint_id: str) -> None:
    """Snapshot the (idle) workspace under checkpoints/CHECKPOINT_ID."""
    cfg = _config(root)
    try:
        with _workspace_lock(root):
            orch = Orchestrator(root, cfg)
            cp = orch.make_checkpoint(checkpoint_id)
    except _INFRA_ERRORS as exc:
        raise _infra(exc) from exc
    _emit(as_json, cp.to_json(), f"checkpoint {cp.id} at ledger position {cp.ledger_position}")


@main.command()
@root_option
@json_option
@click.argument("checkpoint_id")
@click.argument("dest", type=click.Path(file_okay=False, path_type=Path))
def branch(root: Path, as_json: bool, checkpoint_id: str, dest: Path) -> None:
    """Restore a checkpoint into DEST (a new branch), or into --root itself when DEST is the root."""
    _config(root)
    if dest.exists() and any(dest.iterdir()) and dest.resolve() != root.resolve():
        raise CliFailure(f"{dest} is not empty", EXIT_CONFIG)
    try:
        cp = load_checkpoint(root, checkpoint_id)
        restore(cp, dest)
    except _INFRA_ERRORS as exc:
        raise _infra(exc) from exc
    _emit(as_json, {"checkpoint": cp.id, "dest": str(dest), "ledger_position": cp.ledger_position},
          f"restored {cp.id} into {dest}")


if __name__ == "__main__":
    main()
