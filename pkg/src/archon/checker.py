"""Proof-checker backends.

The toy backend ("MiniCheck") decides every ``.mck`` project in-process:

* ``refl`` holds iff both sides of the equation evaluate to the same natural;
* ``by_axiom A`` is accepted unconditionally and puts ``A`` in the footprint;
* ``by_lemma L`` needs ``L`` to be a theorem visible from here (earlier in the
  file or in a transitively imported file) whose normalized statement equals
  this one, and which did not itself fail; it inherits ``L``'s footprint;
* ``sorry`` is accepted with a placeholder warning;
* ``unsafe_eval`` is always rejected.

Declaration names are global across the project, as in a single Lean
environment. The external backend runs a command template and parses its
line-oriented output with :func:`parse_external_output`.
"""

from __future__ import annotations

import json
import logging
import re
import shlex
import subprocess
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import dialects
from .diagnostics import (
    BACKEND_FAILURE, ERROR, INFO, OTHER, PARSE, PLACEHOLDER, PROOF_FAILURE, TIMEOUT,
    UNKNOWN_REFERENCE, WARNING, Diagnostic,
)
from .workspace import ProjectState, topo_order, transitive_imports

log = logging.getLogger(__name__)

TOY, EXTERNAL = "toy", "external"
OUTPUT_PATH = "<output>"


@dataclass(frozen=True)
class CheckerConfig:
    command: str = ""  # external only; {root} and optionally {file} are substituted
    timeout: float | None = 30.0  # per file (per run without {file}); toy ignores it


@dataclass
class CheckReport:
    success: bool
    diagnostics: list[Diagnostic] = field(default_factory=list)
    axiom_footprint: dict[str, frozenset[str]] = field(default_factory=dict)
    elapsed: float = 0.0

    def errors(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.severity == ERROR]

    def placeholders(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.kind == PLACEHOLDER]

    def to_json(self, include_elapsed: bool = True) -> dict:
        out = {
            "success": self.success,
            "diagnostics": [d.to_dict() for d in self.diagnostics],
            "axiom_footprint": {k: sorted(v) for k, v in sorted(self.axiom_footprint.items())},
        }
        if include_elapsed:
            out["elapsed"] = round(self.elapsed, 6)
        return out

    @classmethod
    def from_json(cls, data: dict) -> "CheckReport":
        return cls(
            success=data["success"],
            diagnostics=[Diagnostic.from_dict(d) for d in data["diagnostics"]],
            axiom_footprint={k: frozenset(v) for k, v in data["axiom_footprint"].items()},
            elapsed=data.get("elapsed", 0.0),
        )


def _finish(diags: list[Diagnostic], footprint: dict, started: float) -> CheckReport:
    diags = sorted(set(diags))
    return CheckReport(
        success=not any(d.severity == ERROR for d in diags),
        diagnostics=diags,
        axiom_footprint=dict(sorted(footprint.items())),
        elapsed=time.perf_counter() - started,
    )


def check(state: ProjectState, backend: str = TOY, config: CheckerConfig | None = None) -> CheckReport:
    config = config or CheckerConfig()
    if backend == TOY:
        return check_toy(state)
    if backend == EXTERNAL:
        return check_external(state, config)
    raise ValueError(f"unknown backend {backend!r}")


# -- toy ---------------------------------------------------------------------


class _EvalError(Exception):
    def __init__(self, name: str, span):
        super().__init__(name)
        self.name = name
        self.span = span


def evaluate(expr, env: dict[str, int]) -> int:
    op = expr[0]
    if op == "num":
        return expr[1]
    if op == "ref":
        if expr[1] not in env:
            raise _EvalError(expr[1], expr[2])
        return env[expr[1]]
    a, b = evaluate(expr[1], env), evaluate(expr[2], env)
    return a + b if op == "+" else a * b


@dataclass
class _Done:
    kind: str  # definition | theorem
    path: str
    statement: tuple[str, ...]
    ok: bool
    placeholder: bool = False
    value: int | None = None
    footprint: frozenset[str] = frozenset()


def check_toy(state: ProjectState) -> CheckReport:
    started = time.perf_counter()
    diags = [d for d in state.diagnostics if state.files.get(d.file) is None
             or state.files[d.file].dialect == dialects.TOY]
    done: dict[str, _Done] = {}
    footprint: dict[str, frozenset[str]] = {}
    for path in topo_order(state):
        f = state.files[path]
        if f.dialect != dialects.TOY:
            continue
        visible_files = transitive_imports(state, path)
        local: set[str] = set()
        parsed = state.parses[path]
        seen_here: set[str] = set()
        for d in parsed.decls:
            if d.kind == "import-directive":
                continue
            if d.name in seen_here:
                continue  # duplicate within the file: already a workspace diagnostic
            seen_here.add(d.name)
            if d.name in done:
                diags.append(Diagnostic(path, d.name_span, ERROR, PARSE,
                                        f"{d.name} already declared in {done[d.name].path}"))
                continue
            visible = {n for n, r in done.items() if r.path in visible_files or n in local}
            local.add(d.name)
            if not d.parsed:
                done[d.name] = _Done(d.kind, path, d.statement, ok=False)
                continue
            env = {n: done[n].value for n in visible
                   if done[n].kind == "definition" and done[n].ok}
            result = _check_decl(d, path, env, visible, done, diags)
            done[d.name] = result
            if result.ok and not result.placeholder:
                footprint[d.name] = result.footprint
    return _finish(diags, footprint, started)


def _check_decl(d: dialects.ParsedDecl, path: str, env: dict[str, int], visible: set[str],
                done: dict[str, _Done], diags: list[Diagnostic]) -> _Done:
    failed = _Done(d.kind, path, d.statement, ok=False)
    try:
        if d.kind == "definition":
            return _Done(d.kind, path, d.statement, ok=True, value=evaluate(d.lhs, env))
        lhs, rhs = evaluate(d.lhs, env), evaluate(d.rhs, env)
    except _EvalError as exc:
        what = "not a definition" if exc.name in visible else "unknown identifier"
        diags.append(Diagnostic(path, exc.span, ERROR, UNKNOWN_REFERENCE, f"{what} {exc.name!r}"))
        return failed

    proof = d.proof
    if proof[0] == "refl":
        if lhs == rhs:
            return _Done(d.kind, path, d.statement, ok=True)
        diags.append(Diagnostic(path, d.name_span, ERROR, PROOF_FAILURE,
                                f"refl failed: {lhs} ≠ {rhs}"))
        return failed
    if proof[0] == "sorry":
        tok = d.proof_tokens[0]
        diags.append(Diagnostic(path, tok.span, WARNING, PLACEHOLDER, f"declaration {d.name} uses 'sorry'"))
        return _Done(d.kind, path, d.statement, ok=True, placeholder=True)
    if proof[0] == "by_axiom":
        return _Done(d.kind, path, d.statement, ok=True, footprint=frozenset({proof[1]}))
    if proof[0] == "by_lemma":
        target = proof[1]
        ref = done.get(target) if target in visible else None
        if ref is None or ref.kind != "theorem":
            msg = f"unknown lemma {target!r}" if target not in done else f"lemma {target!r} is not in scope"
            diags.append(Diagnostic(path, d.proof_tokens[1].span, ERROR, PROOF_FAILURE, msg))
            return failed
        if not ref.ok:
            diags.append(Diagnostic(path, d.proof_tokens[1].span, ERROR, PROOF_FAILURE,
                                    f"lemma {target!r} failed to check"))
            return failed
        if ref.statement != d.statement:
            diags.append(Diagnostic(path, d.name_span, ERROR, PROOF_FAILURE,
                                    f"statement does not match lemma {target!r}"))
            return failed
        if ref.placeholder:
            diags.append(Diagnostic(path, d.proof_tokens[1].span, INFO, OTHER,
                                    f"lemma {target!r} is still a placeholder"))
        return _Done(d.kind, path, d.statement, ok=True, footprint=ref.footprint)
    # unsafe_eval
    diags.append(Diagnostic(path, d.proof_tokens[0].span, ERROR, PROOF_FAILURE,
                            "unsafe_eval is not accepted by the checker"))
    return failed


# -- external ----------------------------------------------------------------

_SEV_LINE = re.compile(r"^(error|warning|info)\s+(\S+?):(\d+):(\d+)-(\d+):(\d+)\s*(.*)$")
_LEAN_LINE = re.compile(r"^(\S+?):(\d+):(\d+):\s*(error|warning|info)\s*:\s*(.*)$")
_AXIOMS = re.compile(r"^'([^']+)' depends on axioms: \[(.*)\]\s*$")
_NO_AXIOMS = re.compile(r"^'([^']+)' does not depend on any axioms\s*$")


def _kind_for(severity: str, message: str) -> str:
    m = message.lower()
    if "sorry" in m:
        return PLACEHOLDER
    if "unknown identifier" in m or "unknown constant" in m or "unknown namespace" in m:
        return UNKNOWN_REFERENCE
    if "unexpected token" in m or ("expected" in m and "term" in m) or "parse" in m:
        return PARSE
    if "timeout" in m or "heartbeats" in m:
        return TIMEOUT
    return PROOF_FAILURE if severity == ERROR else OTHER


def parse_external_output(raw: str) -> list[Diagnostic]:
    """Diagnostics from checker output, in line order.

    Recognized lines: ``SEV file:line:col-line:col message`` and Lean's own
    ``file:line:col: SEV: message``. Axiom-report lines are consumed by
    :func:`parse_axiom_report`. Anything else becomes an info diagnostic on the
    synthetic path ``<output>``.
    """
    out: list[Diagnostic] = []
    for lineno, line in enumerate(raw.splitlines(), start=1):
        text = line.rstrip()
        if not text.strip():
            continue
        if m := _SEV_LINE.match(text):
            sev, path, l, c, el, ec, msg = m.groups()
            out.append(Diagnostic(path, (int(l), int(c), int(el), int(ec)), sev, _kind_for(sev, msg), msg))
        elif m := _LEAN_LINE.match(text):
            path, l, c, sev, msg = m.groups()
            out.append(Diagnostic(path, (int(l), int(c), int(l), int(c)), sev, _kind_for(sev, msg), msg))
        elif _AXIOMS.match(text) or _NO_AXIOMS.match(text):
            continue
        else:
            out.append(Diagnostic(OUTPUT_PATH, (lineno, 1, lineno, len(text) + 1), INFO, OTHER, text.strip()))
    return out


def parse_axiom_report(raw: str) -> dict[str, frozenset[str]]:
    footprint = {}
    for line in raw.splitlines():
        if m := _AXIOMS.match(line.strip()):
            footprint[m.group(1)] = frozenset(a.strip() for a in m.group(2).split(",") if a.strip())
        elif m := _NO_AXIOMS.match(line.strip()):
            footprint[m.group(1)] = frozenset()
    return footprint


def _run(argv: list[str], cwd: str, timeout: float | None):
    return subprocess.run(argv, cwd=cwd, capture_output=True, text=True, timeout=timeout)


def check_external(state: ProjectState, config: CheckerConfig) -> CheckReport:
    started = time.perf_counter()
    if not config.command.strip():
        return _finish([Diagnostic("<backend>", (0, 0, 0, 0), ERROR, BACKEND_FAILURE,
                                   "no external command configured")], {}, started)
    root = str(Path(state.root).resolve())
    per_file = "{file}" in config.command
    targets = sorted(p for p, f in state.files.items() if f.dialect == dialects.EXTERNAL) if per_file else [None]
    diags: list[Diagnostic] = []
    footprint: dict[str, frozenset[str]] = {}
    for target in targets:
        argv = [a.replace("{root}", root).replace("{file}", target or "") for a in shlex.split(config.command)]
        where = target or "<project>"
        try:
            proc = _run(argv, root, config.timeout)
        except subprocess.TimeoutExpired:
            diags.append(Diagnostic(where, (0, 0, 0, 0), ERROR, TIMEOUT,
                                    f"checker timed out after {config.timeout}s"))
            continue
        except OSError as exc:
            diags.append(Diagnostic(where, (0, 0, 0, 0), ERROR, BACKEND_FAILURE, f"cannot run checker: {exc}"))
            continue
        raw = proc.stdout + ("\n" + proc.stderr if proc.stderr else "")
        parsed = parse_external_output(raw)
        footprint.update(parse_axiom_report(raw))
        typed = [d for d in parsed if d.file != OUTPUT_PATH]
        if proc.returncode != 0 and not any(d.severity == ERROR for d in typed):
            tail = " | ".join(raw.strip().splitlines()[-3:])
            diags.append(Diagnostic(where, (0, 0, 0, 0), ERROR, BACKEND_FAILURE,
                                    f"checker exited {proc.returncode}: {tail}"[:500]))
            diags.extend(typed)
        else:
            diags.extend(parsed)
    return _finish(diags, footprint, started)


def write_report(report: CheckReport, path: Path, include_elapsed: bool = True) -> None:
    from .workspace import atomic_write

    atomic_write(path, json.dumps(report.to_json(include_elapsed), indent=2, sort_keys=True) + "\n")
