import pytest

from archon.dialects import TOY
from archon.gate import (
    AXIOM_INTRO, PLACEHOLDER, UNSAFE_FEATURE, GatePolicy, compare_spec, derive_spec, escape_hatch_scan,
    first_divergence, persist_verdict, verify,
)
from archon.workspace import SourceFile, scan_project

from helpers import write_src

SPEC = "def two := 2\ntheorem t : two + two = 4 := sorry\n"


def project(tmp_path, body):
    write_src(tmp_path, {"src/A.mck": body})
    return scan_project(tmp_path)


def spec(text=SPEC):
    return SourceFile("spec/Challenge.mck", text, TOY)


def test_clean_project_passes(tmp_path):
    v = verify(project(tmp_path, "def two := 2\ntheorem t : two + two = 4 := refl\n"), "toy", spec())
    assert v.passed and v.failed_checks() == []
    assert [m[0] for m in v.spec_report.matched] == ["two", "t"]


def test_hatch_scan_ignores_comments_and_strings(tmp_path):
    s = project(tmp_path, "-- sorry\n/- unsafe_eval -/\ntheorem t : 1 = 1 := sorry\ntheorem u : 1 = 1 := by_axiom K\n")
    hits = escape_hatch_scan(s)
    assert [(h.token, h.category, h.span[0]) for h in hits] == [
        ("sorry", PLACEHOLDER, 3), ("by_axiom", AXIOM_INTRO, 4)]


def test_custom_lexicon(tmp_path):
    s = project(tmp_path, "theorem t : 1 = 1 := unsafe_eval\n")
    assert [h.category for h in escape_hatch_scan(s, {"unsafe_eval"})] == [UNSAFE_FEATURE]
    assert escape_hatch_scan(s, set()) == []


def test_footprint_outside_allow_list_fails(tmp_path):
    s = project(tmp_path, "def two := 2\ntheorem t : two + two = 4 := by_axiom Cheat\n")
    v = verify(s, "toy", spec(), GatePolicy(allow_declared_axioms=True))
    assert v.failed_checks() == ["footprint"]
    assert v.offending == [("t", "Cheat")]
    ok = verify(s, "toy", spec(), GatePolicy(allow_declared_axioms=True, allowed_axioms=frozenset({"Cheat"})))
    assert ok.passed


def test_placeholders_fail_build_only_when_configured(tmp_path):
    s = project(tmp_path, "def two := 2\ntheorem t : two + two = 4 := sorry\n")
    lax = verify(s, "toy", spec(), GatePolicy(lexicon=frozenset()))
    assert lax.passed
    strict = verify(s, "toy", spec(), GatePolicy(lexicon=frozenset(), placeholders_fail_build=True))
    assert strict.failed_checks() == ["build"]


def test_spec_mismatch_reports_first_divergence(tmp_path):
    s = project(tmp_path, "def two := 2\ntheorem t : two * two = 4 := refl\n")
    r = compare_spec(spec(), s)
    assert r.mismatched == [("t", ("two", "+", "two", "=", "4"), ("two", "*", "two", "=", "4"), 1)]


def test_spec_missing_and_kind_mismatch(tmp_path):
    s = project(tmp_path, "theorem two : 2 = 2 := refl\n")
    r = compare_spec(spec(), s)
    assert r.missing == ["t"]
    assert r.mismatched[0][0] == "two" and r.mismatched[0][3] == -1


def test_unparseable_spec_fails_gate(tmp_path):
    s = project(tmp_path, "def two := 2\n")
    v = verify(s, "toy", spec("def two := (\n"))
    assert not v.passed and "spec" in v.failed_checks() and v.errors


def test_missing_spec_fails_gate(tmp_path):
    v = verify(project(tmp_path, "def two := 2\n"), "toy", None)
    assert not v.passed


def test_checker_crash_fails_gate(tmp_path, monkeypatch):
    import archon.gate as gate

    def boom(*a, **k):
        raise RuntimeError("kaput")

    monkeypatch.setattr(gate, "check", boom)
    v = verify(project(tmp_path, "def two := 2\ntheorem t : two + two = 4 := refl\n"), "toy", spec())
    assert not v.passed and "build" in v.failed_checks()


@pytest.mark.parametrize("a,b,i", [("abc", "abd", 2), ("ab", "abc", 2), ("", "x", 0), ("xy", "xy", 2)])
def test_first_divergence(a, b, i):
    assert first_divergence(tuple(a), tuple(b)) == i


def test_derive_spec_matches_its_own_project(tmp_path):
    s = project(tmp_path, "def two := 2\ntheorem t : two + two = 4 := refl\n")
    text = derive_spec(s)
    assert compare_spec(SourceFile("spec/D.mck", text, TOY), s).ok
    assert "t" not in derive_spec(s, names={"two"}).split()


def test_persist_verdict(tmp_path):
    v = verify(project(tmp_path, "def two := 2\ntheorem t : two + two = 4 := refl\n"), "toy", spec())
    p = persist_verdict(tmp_path, v, "v0001")
    assert p.name == "v0001.json" and '"pass": true' in p.read_text()
