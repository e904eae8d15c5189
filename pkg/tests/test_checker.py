import sys
import textwrap

import pytest

from archon.checker import (
    CheckReport, CheckerConfig, check, parse_axiom_report, parse_external_output,
)
from archon.diagnostics import BACKEND_FAILURE, PARSE, PLACEHOLDER, PROOF_FAILURE, TIMEOUT, UNKNOWN_REFERENCE
from archon.workspace import scan_project

from helpers import write_src


def run(tmp_path, files):
    write_src(tmp_path, files)
    return check(scan_project(tmp_path))


def kinds(report):
    return sorted((d.severity, d.kind) for d in report.diagnostics)


def test_refl_evaluates_definitions(tmp_path):
    r = run(tmp_path, {"src/A.mck": "def two := 2\ndef six := two * 3\ntheorem t : six + two = 8 := refl\n"})
    assert r.success and r.diagnostics == []
    assert r.axiom_footprint == {"two": frozenset(), "six": frozenset(), "t": frozenset()}


def test_refl_rejects_false_equation(tmp_path):
    r = run(tmp_path, {"src/A.mck": "theorem t : 2 + 2 = 5 := refl\n"})
    assert not r.success
    assert kinds(r) == [("error", PROOF_FAILURE)]


def test_sorry_is_a_warning_and_excluded_from_footprint(tmp_path):
    r = run(tmp_path, {"src/A.mck": "theorem t : 2 + 2 = 5 := sorry\n"})
    assert r.success
    assert kinds(r) == [("warning", PLACEHOLDER)]
    assert "t" not in r.axiom_footprint


def test_by_axiom_and_lemma_inherit_footprint(tmp_path):
    r = run(tmp_path, {
        "src/A.mck": "theorem base : 1 = 2 := by_axiom Magic\n",
        "src/B.mck": "import A\ntheorem user : 1 = 2 := by_lemma base\n",
    })
    assert r.success
    assert r.axiom_footprint == {"base": frozenset({"Magic"}), "user": frozenset({"Magic"})}


def test_by_lemma_requires_visibility_and_same_statement(tmp_path):
    r = run(tmp_path, {
        "src/A.mck": "theorem base : 1 = 1 := refl\n",
        "src/B.mck": "theorem hidden : 1 = 1 := by_lemma base\n",
        "src/C.mck": "import A\ntheorem wrong : 2 = 2 := by_lemma base\n",
    })
    msgs = sorted(d.message for d in r.errors())
    assert any("not in scope" in m for m in msgs)
    assert any("does not match" in m for m in msgs)


def test_unsafe_eval_always_rejected(tmp_path):
    r = run(tmp_path, {"src/A.mck": "theorem t : 1 = 1 := unsafe_eval\n"})
    assert kinds(r) == [("error", PROOF_FAILURE)]


def test_unknown_identifier_and_parse_error(tmp_path):
    r = run(tmp_path, {"src/A.mck": "theorem t : ghost = 1 := refl\ndef x := (1\n"})
    got = {d.kind for d in r.errors()}
    assert UNKNOWN_REFERENCE in got and PARSE in got


def test_report_is_deterministic_and_round_trips(tmp_path):
    write_src(tmp_path, {"src/A.mck": "theorem a : 1 = 2 := refl\ntheorem b : 1 = 1 := sorry\n"})
    s = scan_project(tmp_path)
    one, two = check(s), check(s)
    assert one.to_json(False) == two.to_json(False)
    assert CheckReport.from_json(one.to_json()).to_json(False) == one.to_json(False)


def test_parse_external_output_formats():
    raw = textwrap.dedent("""\
        error A.lean:3:4-3:9 unknown identifier 'foo'
        A.lean:7:2: warning: declaration uses 'sorry'
        'main' depends on axioms: [propext, Classical.choice]
        'aux' does not depend on any axioms
        random chatter
    """)
    diags = parse_external_output(raw)
    assert [(d.file, d.kind) for d in diags] == [
        ("A.lean", UNKNOWN_REFERENCE), ("A.lean", PLACEHOLDER), ("<output>", "other")]
    assert diags[0].span == (3, 4, 3, 9)
    assert parse_axiom_report(raw) == {"main": frozenset({"propext", "Classical.choice"}), "aux": frozenset()}


def _fake_checker(tmp_path, body):
    script = tmp_path / "fake_checker.py"
    script.write_text(body)
    return f"{sys.executable} {script} {{root}}"


def test_external_command_output_is_parsed(tmp_path):
    write_src(tmp_path, {"src/A.lean": "theorem t : 1 = 1 := sorry\n"})
    cmd = _fake_checker(tmp_path, "print(\"A.lean:1:22: warning: declaration uses 'sorry'\")\n"
                                  "print(\"'t' depends on axioms: [sorryAx]\")\n")
    r = check(scan_project(tmp_path), "external", CheckerConfig(command=cmd))
    assert r.success
    assert kinds(r) == [("warning", PLACEHOLDER)]
    assert r.axiom_footprint == {"t": frozenset({"sorryAx"})}


def test_external_nonzero_exit_without_errors_is_backend_failure(tmp_path):
    write_src(tmp_path, {"src/A.lean": "theorem t : 1 = 1 := rfl\n"})
    cmd = _fake_checker(tmp_path, "import sys\nprint('boom')\nsys.exit(3)\n")
    r = check(scan_project(tmp_path), "external", CheckerConfig(command=cmd))
    assert not r.success and r.errors()[0].kind == BACKEND_FAILURE


def test_external_timeout(tmp_path):
    write_src(tmp_path, {"src/A.lean": "theorem t : 1 = 1 := rfl\n"})
    cmd = _fake_checker(tmp_path, "import time\ntime.sleep(5)\n")
    r = check(scan_project(tmp_path), "external", CheckerConfig(command=cmd, timeout=0.3))
    assert not r.success and r.errors()[0].kind == TIMEOUT


def test_external_without_command(tmp_path):
    write_src(tmp_path, {"src/A.lean": "theorem t : 1 = 1 := rfl\n"})
    r = check(scan_project(tmp_path), "external", CheckerConfig())
    assert r.errors()[0].kind == BACKEND_FAILURE


def test_unknown_backend(tmp_path):
    with pytest.raises(ValueError):
        check(scan_project(tmp_path), "coq")
