import pytest
from hypothesis import given, settings, strategies as st

from archon.workspace import (
    CLOSED, OPEN, Edit, EditRejected, MutationTokens, ProjectState, apply_edit, dependency_partition,
    scan_project, sync_to_disk,
)

from helpers import write_src

BASIC = "def two := 2\ntheorem t : two + 2 = 4 := sorry\n"


@pytest.fixture
def ws(tmp_path):
    write_src(tmp_path, {
        "src/M/Basic.mck": BASIC,
        "src/M/Top.mck": "import M.Basic\ntheorem u : two = 2 := sorry\n",
        "src/M/Alone.mck": "theorem w : 1 = 1 := refl\n",
        "src/notes.txt": "ignored",
    })
    return tmp_path


def test_scan_finds_files_declarations_obligations(ws):
    s = scan_project(ws)
    assert sorted(s.files) == ["src/M/Alone.mck", "src/M/Basic.mck", "src/M/Top.mck"]
    assert s.import_graph == (("src/M/Top.mck", "src/M/Basic.mck"),)
    assert sorted(s.obligations) == ["src/M/Basic.mck::t", "src/M/Top.mck::u"]
    assert all(o.status == OPEN and o.attempts == 0 for o in s.obligations.values())
    d = s.declaration_for("src/M/Basic.mck::t")
    assert d.kind == "theorem" and d.proof_state == "placeholder" and d.location == ("src/M/Basic.mck", (2, 2))


def test_import_cycle_edge_is_dropped_with_diagnostic(tmp_path):
    write_src(tmp_path, {"src/A.mck": "import B\n", "src/B.mck": "import A\n"})
    s = scan_project(tmp_path)
    assert len(s.import_graph) == 1
    assert any("import cycle" in d.message for d in s.diagnostics)


def test_unknown_module_is_reported(tmp_path):
    write_src(tmp_path, {"src/A.mck": "import Nope\n"})
    assert any(d.kind == "unknown_reference" for d in scan_project(tmp_path).diagnostics)


def test_edit_needs_a_covering_token(ws):
    s = scan_project(ws)
    tokens = MutationTokens()
    with pytest.raises(EditRejected):
        apply_edit(s, Edit("src/M/Basic.mck", BASIC, "s1", None), tokens)
    tok = tokens.issue(["src/M/Top.mck"], "s1")
    with pytest.raises(EditRejected):
        apply_edit(s, Edit("src/M/Basic.mck", BASIC, "s1", tok), tokens)


@pytest.mark.parametrize("path", ["../evil.mck", "/etc/x.mck", "src/../../x.mck", "spec/X.mck", "src/a.txt"])
def test_paths_outside_sources_are_rejected(ws, path):
    s = scan_project(ws)
    tokens = MutationTokens()
    tok = tokens.issue(["src/", path], "s1")
    with pytest.raises(EditRejected):
        apply_edit(s, Edit(path, "def x := 1\n", "s1", tok), tokens)


def test_overlapping_scopes_cannot_be_held_together():
    tokens = MutationTokens()
    t = tokens.issue(["src/A/"], "one")
    with pytest.raises(EditRejected):
        tokens.issue(["src/A/B.mck"], "two")
    tokens.release(t)
    tokens.issue(["src/A/B.mck"], "two")


def test_apply_edit_is_pure_and_bumps_version(ws):
    s = scan_project(ws)
    tokens = MutationTokens()
    tok = tokens.issue(["src/"], "s1")
    new = apply_edit(s, Edit("src/M/Basic.mck", BASIC.replace("sorry", "refl"), "s1", tok), tokens)
    assert s.files["src/M/Basic.mck"].version == 0
    assert new.files["src/M/Basic.mck"].version == 1
    assert new.declaration_for("src/M/Basic.mck::t").proof_state == "complete"
    # status changes only after a whole-project check; the edit itself leaves it open
    assert new.obligations["src/M/Basic.mck::t"].status == OPEN
    assert (ws / "src/M/Basic.mck").read_text() == BASIC
    sync_to_disk(new, ["src/M/Basic.mck"])
    assert "refl" in (ws / "src/M/Basic.mck").read_text()


def test_renamed_declaration_closes_as_refactored_and_opens_new(ws):
    s = scan_project(ws)
    tokens = MutationTokens()
    tok = tokens.issue(["src/"], "s1")
    new = apply_edit(s, Edit("src/M/Basic.mck", BASIC.replace("theorem t", "theorem t2"), "s1", tok), tokens)
    old = new.obligations["src/M/Basic.mck::t"]
    assert old.status == CLOSED and old.history[-1] == ("s1", "refactored")
    assert new.obligations["src/M/Basic.mck::t2"].status == OPEN


def test_closed_obligation_reopens_when_placeholder_returns(ws):
    s = scan_project(ws)
    closed = {oid: o for oid, o in s.obligations.items()}
    closed["src/M/Basic.mck::t"] = closed["src/M/Basic.mck::t"].record("s0", "closed", CLOSED)
    s = s.with_obligations(closed)
    tokens = MutationTokens()
    tok = tokens.issue(["src/"], "s1")
    new = apply_edit(s, Edit("src/M/Basic.mck", BASIC + "\n", "s1", tok), tokens)
    o = new.obligations["src/M/Basic.mck::t"]
    assert o.status == OPEN and o.history[-1] == ("s1", "reopened")


def test_delete_file(ws):
    s = scan_project(ws)
    tokens = MutationTokens()
    tok = tokens.issue(["src/"], "s1")
    new = apply_edit(s, Edit("src/M/Alone.mck", None, "s1", tok), tokens)
    assert "src/M/Alone.mck" not in new.files
    sync_to_disk(new, ["src/M/Alone.mck"])
    assert not (ws / "src/M/Alone.mck").exists()


def test_dependency_partition_groups_connected_files(ws):
    write_src(ws, {"src/M/Alone.mck": "theorem w : 1 = 1 := sorry\n"})
    groups = dependency_partition(scan_project(ws))
    assert [g.obligations for g in groups] == [
        ("src/M/Alone.mck::w",), ("src/M/Basic.mck::t", "src/M/Top.mck::u")]
    assert groups[1].files == ("src/M/Basic.mck", "src/M/Top.mck")


def test_json_round_trip(ws):
    s = scan_project(ws)
    assert ProjectState.from_json(s.to_json()) == s


@settings(max_examples=30, deadline=None)
@given(st.lists(st.sampled_from(["refl", "sorry", "by_axiom X"]), min_size=1, max_size=8))
def test_versions_strictly_increase(tmp_path_factory, proofs):
    root = tmp_path_factory.mktemp("v")
    write_src(root, {"src/A.mck": "theorem t : 1 = 1 := sorry\n"})
    s = scan_project(root)
    tokens = MutationTokens()
    tok = tokens.issue(["src/A.mck"], "s")
    seen = [s.files["src/A.mck"].version]
    for p in proofs:
        s = apply_edit(s, Edit("src/A.mck", f"theorem t : 1 = 1 := {p}\n", "s", tok), tokens)
        seen.append(s.files["src/A.mck"].version)
    assert seen == sorted(set(seen))
