"""Final verification gate.

Four independent layers, all of which must pass:

1. build: the checker reports no errors;
2. escape hatches: no lexicon token outside comments and strings;
3. axiom footprint: every declaration depends only on allowed axioms;
4. statement match: each declaration of the reviewed spec file has a
   same-named project declaration with identical normalized statement tokens.

Statement matching is purely syntactic. Whether a stronger checker would
accept definitionally equal statements is deliberately not modeled.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from . import dialects
from .checker import CheckerConfig, CheckReport, check
from .diagnostics import BACKEND_FAILURE, ERROR, Diagnostic
from .workspace import ProjectState, SourceFile, atomic_write, dialect_of

log = logging.getLogger(__name__)

PLACEHOLDER, AXIOM_INTRO, UNSAFE_FEATURE = "placeholder", "axiom_intro", "unsafe_feature"

TOY_LEXICON = frozenset({"sorry", "by_axiom", "unsafe_eval"})
EXTERNAL_LEXICON = frozenset({"sorry", "sorryAx", "admit", "axiom", "unsafe"})
DEFAULT_LEXICON = {dialects.TOY: TOY_LEXICON, dialects.EXTERNAL: EXTERNAL_LEXICON}
STANDARD_AXIOMS = frozenset({"propext", "Classical.choice", "Quot.sound"})

_PLACEHOLDER_WORDS = {"sorry", "sorryAx", "admit"}
_AXIOM_WORDS = {"by_axiom", "axiom"}


def categorize(token: str) -> str:
    if token in _PLACEHOLDER_WORDS:
        return PLACEHOLDER
    if token in _AXIOM_WORDS:
        return AXIOM_INTRO
    return UNSAFE_FEATURE


@dataclass(frozen=True, order=True)
class EscapeHatchHit:
    file: str
    span: tuple[int, int, int, int]
    token: str
    category: str


@dataclass
class SpecMatchReport:
    matched: list[tuple[str, str]] = field(default_factory=list)
    mismatched: list[tuple[str, tuple[str, ...], tuple[str, ...], int]] = field(default_factory=list)
    missing: list[str] = field(default_factory=list)
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None and not self.mismatched and not self.missing

    def to_json(self) -> dict:
        return {
            "matched": [list(m) for m in self.matched],
            "mismatched": [{"name": n, "spec": list(s), "project": list(p), "index": i}
                           for n, s, p, i in self.mismatched],
            "missing": list(self.missing),
            "error": self.error,
        }


@dataclass(frozen=True)
class GatePolicy:
    lexicon: frozenset[str] | None = None  # None: per-dialect default
    allowed_axioms: frozenset[str] = STANDARD_AXIOMS
    allow_declared_axioms: bool = False
    placeholders_fail_build: bool = False


@dataclass
class GateVerdict:
    build_ok: bool
    hatch_hits: list[EscapeHatchHit]
    footprint_ok: bool
    offending: list[tuple[str, str]]
    spec_report: SpecMatchReport
    passed: bool
    errors: list[Diagnostic] = field(default_factory=list)
    report: CheckReport | None = None

    def failed_checks(self) -> list[str]:
        out = []
        if not self.build_ok:
            out.append("build")
        if self.hatch_hits:
            out.append("hatch")
        if not self.footprint_ok:
            out.append("footprint")
        if not self.spec_report.ok:
            out.append("spec")
        return out

    def to_json(self) -> dict:
        return {
            "pass": self.passed,
            "build_ok": self.build_ok,
            "hatch_hits": [{"file": h.file, "span": list(h.span), "token": h.token, "category": h.category}
                           for h in self.hatch_hits],
            "footprint_ok": self.footprint_ok,
            "offending": [list(p) for p in self.offending],
            "spec_report": self.spec_report.to_json(),
            "errors": [d.to_dict() for d in self.errors],
            "build_errors": [d.to_dict() for d in (self.report.errors() if self.report else [])],
        }


def escape_hatch_scan(state: ProjectState, lexicon=None) -> list[EscapeHatchHit]:
    """Every lexicon token outside comments/strings, ordered by location."""
    hits = []
    for path, f in state.files.items():
        words = DEFAULT_LEXICON[f.dialect] if lexicon is None else lexicon
        for tok in dialects.code_tokens(f.content, f.dialect):
            if tok.text in words:
                hits.append(EscapeHatchHit(path, tok.span, tok.text, categorize(tok.text)))
    return sorted(hits)


def check_axiom_footprint(report: CheckReport, allowed) -> tuple[bool, list[tuple[str, str]]]:
    offending = sorted((decl, ax) for decl, axioms in report.axiom_footprint.items()
                       for ax in axioms if ax not in allowed)
    return not offending, offending


def first_divergence(a, b) -> int:
    for i, (x, y) in enumerate(zip(a, b)):
        if x != y:
            return i
    return min(len(a), len(b))


def compare_spec(spec_file: SourceFile, state: ProjectState) -> SpecMatchReport:
    """Match spec declarations to same-named project declarations.

    A kind mismatch (say a spec theorem against a project def) is reported
    with divergence index -1.
    """
    parsed = dialects.parse(spec_file.content, spec_file.dialect)
    broken = [d for d in parsed.decls if not d.parsed]
    if parsed.errors or broken:
        where = parsed.errors[0][1] if parsed.errors else f"{broken[0].name}: {broken[0].error}"
        return SpecMatchReport(error=f"spec file {spec_file.path} does not parse: {where}")
    by_name: dict[str, list] = {}
    for (path, name), d in sorted(state.declarations.items()):
        by_name.setdefault(name, []).append(d)
    report = SpecMatchReport()
    for sd in parsed.decls:
        if sd.kind == "import-directive":
            continue
        candidates = by_name.get(sd.name, [])
        if not candidates:
            report.missing.append(sd.name)
            continue
        hit = next((c for c in candidates if c.kind == sd.kind and c.statement_text == sd.statement), None)
        if hit is not None:
            report.matched.append((sd.name, f"{hit.path}::{hit.name}"))
            continue
        c = candidates[0]
        index = -1 if c.kind != sd.kind else first_divergence(sd.statement, c.statement_text)
        report.mismatched.append((sd.name, sd.statement, c.statement_text, index))
    return report


def derive_spec(state: ProjectState, names=None) -> str:
    """Spec text restating project declarations with placeholder proofs.

    Only toy-dialect declarations are rendered; ``names`` restricts the set.
    """
    lines = ["-- Derived specification: statements only, proofs elided."]
    for (path, name), d in sorted(state.declarations.items()):
        if state.files[path].dialect != dialects.TOY or (names is not None and name not in names):
            continue
        body = " ".join(d.statement_text)
        if d.kind == "definition":
            lines.append(f"def {name} := {body}")
        elif d.kind == "theorem":
            lines.append(f"theorem {name} : {body} := sorry")
    return "\n".join(lines) + "\n"


def load_spec(root, rel_path: str) -> SourceFile:
    p = Path(root) / rel_path
    dialect = dialect_of(rel_path)
    if dialect is None:
        raise ValueError(f"spec file {rel_path} has no known dialect")
    return SourceFile(rel_path, p.read_text(encoding="utf-8"), dialect)


def verify(state: ProjectState, backend: str, spec_file: SourceFile | None,
           policy: GatePolicy | None = None, config: CheckerConfig | None = None) -> GateVerdict:
    policy = policy or GatePolicy()
    errors: list[Diagnostic] = []
    report = None
    try:
        report = check(state, backend, config)
    except Exception as exc:  # any checker crash fails the gate
        log.exception("checker crashed")
        errors.append(Diagnostic("<gate>", (0, 0, 0, 0), ERROR, BACKEND_FAILURE, f"checker crashed: {exc}"))
    build_ok = report is not None and report.success
    if build_ok and policy.placeholders_fail_build and report.placeholders():
        build_ok = False

    hits = escape_hatch_scan(state, policy.lexicon)
    if policy.allow_declared_axioms:
        hits = [h for h in hits if h.category != AXIOM_INTRO]

    if report is not None:
        footprint_ok, offending = check_axiom_footprint(report, policy.allowed_axioms)
    else:
        footprint_ok, offending = False, []

    if spec_file is None:
        spec_report = SpecMatchReport(error="spec file missing")
    else:
        try:
            spec_report = compare_spec(spec_file, state)
        except Exception as exc:
            spec_report = SpecMatchReport(error=f"spec comparison crashed: {exc}")
    if spec_report.error:
        errors.append(Diagnostic(spec_file.path if spec_file else "<spec>", (0, 0, 0, 0), ERROR,
                                 BACKEND_FAILURE, spec_report.error))

    passed = build_ok and not hits and footprint_ok and spec_report.ok and not errors
    return GateVerdict(build_ok, hits, footprint_ok, offending, spec_report, passed, errors, report)


def persist_verdict(root, verdict: GateVerdict, stamp: str) -> Path:
    path = Path(root) / "ledger" / "verdicts" / f"{stamp}.json"
    atomic_write(path, json.dumps(verdict.to_json(), indent=2, sort_keys=True) + "\n")
    return path
