"""The proof project on disk, as an immutable value.

``scan_project`` reads ``<root>/src`` into a :class:`ProjectState`;
``apply_edit`` is the only way to derive a modified state and requires a
mutation token from :class:`MutationTokens`. Disk writes are separate
(:func:`sync_to_disk`) so states stay pure values that can be compared,
checkpointed and replayed.
"""

from __future__ import annotations

import logging
import os
import tempfile
import threading
import uuid
from dataclasses import dataclass, field, replace
from pathlib import Path, PurePosixPath

from . import dialects
from .diagnostics import ERROR, PARSE, UNKNOWN_REFERENCE, WARNING, Diagnostic

log = logging.getLogger(__name__)

SOURCE_DIR = "src"
LAYOUT_DIRS = ("src", "references", "routes", "ledger", "spec", "checkpoints")

OPEN, IN_PROGRESS, CLOSED, DEFERRED = "open", "in_progress", "closed", "deferred"
COMPLETE, PLACEHOLDER, AXIOM_DEPENDENT = "complete", "placeholder", "axiom-dependent"


class EditRejected(Exception):
    """An edit violated the workspace contract (scope, root, or token)."""


@dataclass(frozen=True)
class SourceFile:
    path: str
    content: str
    dialect: str
    version: int = 0


@dataclass(frozen=True)
class Declaration:
    name: str
    kind: str
    statement_text: tuple[str, ...]
    proof_state: str
    location: tuple[str, tuple[int, int]]
    parsed: bool = True

    @property
    def path(self) -> str:
        return self.location[0]


@dataclass(frozen=True)
class Obligation:
    id: str
    status: str = OPEN
    attempts: int = 0
    history: tuple[tuple[str, str], ...] = ()

    @property
    def path(self) -> str:
        return self.id.rsplit("::", 1)[0]

    @property
    def name(self) -> str:
        return self.id.rsplit("::", 1)[1]

    def record(self, session_id: str, outcome: str, status: str | None = None) -> "Obligation":
        return replace(self, status=status or self.status, attempts=self.attempts + 1,
                       history=self.history + ((session_id, outcome),))


def obligation_id(path: str, name: str) -> str:
    return f"{path}::{name}"


@dataclass(frozen=True)
class ObligationGroup:
    id: str
    files: tuple[str, ...]
    obligations: tuple[str, ...]


@dataclass(frozen=True)
class Edit:
    path: str
    content: str | None  # None deletes the file
    session_id: str
    token: str | None = None


@dataclass(frozen=True)
class ProjectState:
    root: str
    files: dict[str, SourceFile] = field(default_factory=dict)
    declarations: dict[tuple[str, str], Declaration] = field(default_factory=dict)
    obligations: dict[str, Obligation] = field(default_factory=dict)
    import_graph: tuple[tuple[str, str], ...] = ()  # (importer, imported)
    diagnostics: tuple[Diagnostic, ...] = ()
    parses: dict[str, dialects.ParseResult] = field(default_factory=dict, compare=False, repr=False)

    def decls_in(self, path: str) -> list[Declaration]:
        return [d for (p, _), d in self.declarations.items() if p == path]

    def open_obligations(self) -> list[Obligation]:
        return [o for o in sorted(self.obligations.values(), key=lambda o: o.id) if o.status == OPEN]

    def declaration_for(self, oid: str) -> Declaration | None:
        path, name = oid.rsplit("::", 1)
        return self.declarations.get((path, name))

    def with_obligations(self, obligations: dict[str, Obligation]) -> "ProjectState":
        return replace(self, obligations=dict(sorted(obligations.items())))

    def versions(self) -> dict[str, int]:
        return {p: f.version for p, f in self.files.items()}

    def to_json(self) -> dict:
        return {
            "root": self.root,
            "files": [{"path": f.path, "content": f.content, "dialect": f.dialect, "version": f.version}
                      for f in self.files.values()],
            "obligations": [{"id": o.id, "status": o.status, "attempts": o.attempts,
                             "history": [list(h) for h in o.history]}
                            for o in self.obligations.values()],
        }

    @classmethod
    def from_json(cls, data: dict, root: str | None = None) -> "ProjectState":
        files = {f["path"]: SourceFile(f["path"], f["content"], f["dialect"], f["version"])
                 for f in data["files"]}
        state = build_state(root or data["root"], files)
        obls = {o["id"]: Obligation(o["id"], o["status"], o["attempts"],
                                    tuple(tuple(h) for h in o["history"]))
                for o in data["obligations"]}
        return state.with_obligations(obls)


# ---------------------------------------------------------------------------


def dialect_of(path: str) -> str | None:
    return dialects.EXTENSIONS.get(PurePosixPath(path).suffix)


def scan_project(root: str | os.PathLike) -> ProjectState:
    """Read every source file under ``<root>/src`` into a fresh state.

    Unreadable files and parse failures become diagnostics; they never abort
    the scan. All obligations come back ``open`` with empty history.
    """
    root_path = Path(root)
    if not root_path.is_dir():
        raise FileNotFoundError(f"workspace root {root_path} does not exist")
    resolved_root = root_path.resolve()
    files: dict[str, SourceFile] = {}
    extra: list[Diagnostic] = []
    src = root_path / SOURCE_DIR
    if src.is_dir():
        for p in sorted(src.rglob("*")):
            rel = p.relative_to(root_path).as_posix()
            dialect = dialect_of(rel)
            if dialect is None or not p.is_file():
                continue
            if not p.resolve().is_relative_to(resolved_root):
                extra.append(Diagnostic(rel, (1, 1, 1, 1), ERROR, PARSE, "file escapes the workspace root"))
                continue
            try:
                content = p.read_text(encoding="utf-8")
            except (OSError, UnicodeDecodeError) as exc:
                extra.append(Diagnostic(rel, (1, 1, 1, 1), ERROR, PARSE, f"unreadable file: {exc}"))
                continue
            files[rel] = SourceFile(rel, content, dialect, 0)
    state = build_state(str(root), files)
    if extra:
        state = replace(state, diagnostics=tuple(sorted(state.diagnostics + tuple(extra))))
    return state


def build_state(root: str, files: dict[str, SourceFile],
                parses: dict[str, dialects.ParseResult] | None = None) -> ProjectState:
    files = dict(sorted(files.items()))
    parses = dict(parses or {})
    for path, f in files.items():
        if path not in parses:
            parses[path] = dialects.parse(f.content, f.dialect)
    parses = {p: parses[p] for p in files}

    decls: dict[tuple[str, str], Declaration] = {}
    diags: list[Diagnostic] = []
    edges: list[tuple[str, str]] = []
    for path, f in files.items():
        pr = parses[path]
        for span, msg in pr.errors:
            diags.append(Diagnostic(path, span, ERROR, PARSE, msg))
        for d in pr.decls:
            if d.kind == "import-directive":
                target = dialects.module_path(d.name, f.dialect)
                if target in files:
                    if target != path:
                        edges.append((path, target))
                    else:
                        diags.append(Diagnostic(path, d.name_span, ERROR, PARSE, "file imports itself"))
                elif f.dialect == dialects.TOY:
                    diags.append(Diagnostic(path, d.name_span, ERROR, UNKNOWN_REFERENCE,
                                            f"unknown module {d.name}"))
                continue
            key = (path, d.name)
            if key in decls:
                diags.append(Diagnostic(path, d.name_span or d.span, ERROR, PARSE,
                                        f"duplicate declaration {d.name}"))
                continue
            if not d.parsed:
                diags.append(Diagnostic(path, d.error_span or d.span, ERROR, PARSE,
                                        f"unparseable declaration {d.name}: {d.error}"))
            decls[key] = Declaration(
                name=d.name, kind=d.kind, statement_text=d.statement,
                proof_state=proof_state_of(d, f.dialect),
                location=(path, (d.span[0], d.span[2])), parsed=d.parsed)

    graph = _acyclic(sorted(set(edges)), diags)
    obligations = {}
    for (path, name), d in decls.items():
        if d.proof_state == PLACEHOLDER:
            oid = obligation_id(path, name)
            obligations[oid] = Obligation(oid)
    return ProjectState(root=str(root), files=files, declarations=decls, obligations=obligations,
                        import_graph=tuple(graph), diagnostics=tuple(sorted(set(diags))), parses=parses)


def proof_state_of(d: dialects.ParsedDecl, dialect: str) -> str:
    body = {t.text for t in d.proof_tokens if t.kind == "ident"}
    if body & dialects.PLACEHOLDER_TOKENS[dialect]:
        return PLACEHOLDER
    if body & dialects.AXIOM_TOKENS[dialect]:
        return AXIOM_DEPENDENT
    return COMPLETE


def _acyclic(edges: list[tuple[str, str]], diags: list[Diagnostic]) -> list[tuple[str, str]]:
    """Keep edges in sorted order, dropping any that would close a cycle."""
    adj: dict[str, set[str]] = {}

    def reaches(a: str, b: str) -> bool:
        stack, seen = [a], set()
        while stack:
            x = stack.pop()
            if x == b:
                return True
            if x not in seen:
                seen.add(x)
                stack.extend(adj.get(x, ()))
        return False

    kept = []
    for src, dst in edges:
        if reaches(dst, src):
            diags.append(Diagnostic(src, (1, 1, 1, 1), ERROR, PARSE, f"import cycle through {dst}"))
            continue
        adj.setdefault(src, set()).add(dst)
        kept.append((src, dst))
    return kept


def topo_order(state: ProjectState) -> list[str]:
    """Files with imported files first; ties broken by path."""
    deps = {p: set() for p in state.files}
    for src, dst in state.import_graph:
        deps[src].add(dst)
    order, done = [], set()
    while len(order) < len(deps):
        ready = sorted(p for p in deps if p not in done and deps[p] <= done)
        p = ready[0]
        order.append(p)
        done.add(p)
    return order


def transitive_imports(state: ProjectState, path: str) -> set[str]:
    adj: dict[str, list[str]] = {}
    for src, dst in state.import_graph:
        adj.setdefault(src, []).append(dst)
    seen, stack = set(), list(adj.get(path, ()))
    while stack:
        x = stack.pop()
        if x not in seen:
            seen.add(x)
            stack.extend(adj.get(x, ()))
    return seen


# ---------------------------------------------------------------------------
# Mutation


class MutationTokens:
    """Per-file mutation tokens issued by the orchestrator.

    A scope entry is a file path or a directory prefix ending in ``/``.
    Overlapping scopes cannot be held at the same time.
    """

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._held: dict[str, tuple[str, tuple[str, ...]]] = {}  # token -> (holder, scope)

    def issue(self, scope, holder: str) -> str:
        scope = tuple(sorted(scope))
        with self._lock:
            for other_holder, other in self._held.values():
                if any(_overlaps(a, b) for a in scope for b in other):
                    raise EditRejected(f"scope of {holder} overlaps scope held by {other_holder}")
            token = uuid.uuid4().hex
            self._held[token] = (holder, scope)
            return token

    def release(self, token: str) -> None:
        with self._lock:
            self._held.pop(token, None)

    def covers(self, token: str | None, path: str) -> bool:
        with self._lock:
            held = self._held.get(token or "")
        return held is not None and in_scope(path, held[1])


def _overlaps(a: str, b: str) -> bool:
    return a == b or (a.endswith("/") and b.startswith(a)) or (b.endswith("/") and a.startswith(b))


def in_scope(path: str, scope) -> bool:
    return any(path == s or (s.endswith("/") and path.startswith(s)) for s in scope)


def check_path(root: str, path: str) -> str:
    """Normalize a workspace-relative source path or raise EditRejected."""
    p = PurePosixPath(path)
    if p.is_absolute() or ".." in p.parts or not path:
        raise EditRejected(f"path {path!r} escapes the workspace root")
    norm = p.as_posix()
    if not norm.startswith(SOURCE_DIR + "/"):
        raise EditRejected(f"path {path!r} is outside {SOURCE_DIR}/")
    if dialect_of(norm) is None:
        raise EditRejected(f"path {path!r} has no known dialect")
    resolved = (Path(root) / norm).resolve()
    if not resolved.is_relative_to(Path(root).resolve()):
        raise EditRejected(f"path {path!r} escapes the workspace root")
    return norm


def apply_edit(state: ProjectState, edit: Edit, tokens: MutationTokens) -> ProjectState:
    path = check_path(state.root, edit.path)
    if not tokens.covers(edit.token, path):
        raise EditRejected(f"no mutation token for {path}")
    files = dict(state.files)
    old = files.get(path)
    if edit.content is None:
        if old is None:
            raise EditRejected(f"cannot delete missing file {path}")
        del files[path]
    else:
        version = (old.version if old else 0) + 1
        files[path] = SourceFile(path, edit.content, dialect_of(path), version)
    parses = {p: pr for p, pr in state.parses.items() if p != path}
    new = build_state(state.root, files, parses)
    return new.with_obligations(reconcile(state.obligations, new, path, edit.session_id))


def reconcile(old: dict[str, Obligation], new_state: ProjectState, path: str,
              session_id: str) -> dict[str, Obligation]:
    """Carry obligations across an edit of ``path``.

    Obligations whose declaration vanished close as ``refactored``; closed
    ones whose declaration became a placeholder again reopen; new
    placeholder sites open fresh obligations.
    """
    out = dict(old)
    for oid, o in old.items():
        if o.path != path:
            continue
        decl = new_state.declaration_for(oid)
        if decl is None:
            if o.status != CLOSED:
                out[oid] = o.record(session_id, "refactored", CLOSED)
        elif o.status == CLOSED and decl.proof_state == PLACEHOLDER:
            out[oid] = o.record(session_id, "reopened", OPEN)
    for (p, name), d in new_state.declarations.items():
        oid = obligation_id(p, name)
        if p == path and d.proof_state == PLACEHOLDER and oid not in out:
            out[oid] = Obligation(oid)
    return out


def sync_to_disk(state: ProjectState, paths=None) -> None:
    """Write (or delete) the given files so disk matches ``state``."""
    root = Path(state.root)
    targets = sorted(paths) if paths is not None else sorted(state.files)
    for rel in targets:
        dest = root / rel
        f = state.files.get(rel)
        if f is None:
            if dest.exists():
                dest.unlink()
            continue
        atomic_write(dest, f.content)


def atomic_write(dest: Path, text: str) -> None:
    dest.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=dest.parent, prefix=f".{dest.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, dest)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dependency_partition(state: ProjectState) -> list[ObligationGroup]:
    """Group open obligations by connected component of the undirected import graph."""
    parent = {p: p for p in state.files}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in state.import_graph:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    comps: dict[str, list[str]] = {}
    for o in state.open_obligations():
        if o.path in parent:
            comps.setdefault(find(o.path), []).append(o.id)
    groups = []
    for k, rep in enumerate(sorted(comps)):
        files = tuple(sorted(p for p in state.files if find(p) == rep))
        groups.append(ObligationGroup(f"g{k}", files, tuple(sorted(comps[rep]))))
    return groups
