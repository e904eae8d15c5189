import json

import filelock
from click.testing import CliRunner

from archon.cli import main, status_view
from archon.orchestrator.engine import LOCK_FILE

from helpers import write_src


def invoke(*args):
    return CliRunner().invoke(main, [str(a) for a in args], catch_exceptions=False)


def test_init_then_run_and_status(tmp_path):
    root = tmp_path / "ws"
    assert invoke("init", root, "--template", "toy-anderson").exit_code == 0
    assert (root / ".archon" / "skills").is_dir() and (root / "archon.toml").is_file()
    r = invoke("run", "--root", root, "--json", "--replay")
    assert r.exit_code == 0 and json.loads(r.output)["phase"] == "done"
    s = invoke("status", "--root", root, "--json")
    assert json.loads(s.output) == status_view(root)
    assert "phase: done" in invoke("status", "--root", root).output
    assert invoke("verify", "--root", root).exit_code == 0


def test_init_refuses_non_empty_root(tmp_path):
    (tmp_path / "junk").write_text("x")
    assert invoke("init", tmp_path).exit_code == 2
    assert invoke("init", tmp_path, "--force").exit_code == 0


def test_verify_failure_exits_1(tmp_path):
    root = tmp_path / "ws"
    invoke("init", root, "--template", "toy-anderson")
    r = invoke("verify", "--root", root, "--json")
    assert r.exit_code == 1
    # nothing scaffolded yet, so the specified declarations are missing
    assert json.loads(r.output)["failed_checks"] == ["spec"]


def test_missing_or_bad_config_exits_2(tmp_path):
    assert invoke("run", "--root", tmp_path / "absent").exit_code == 2
    write_src(tmp_path, {"archon.toml": "bogus = true\n"})
    r = invoke("verify", "--root", tmp_path)
    assert r.exit_code == 2 and "unknown key" in r.output


def test_resume_without_ledger_exits_2(tmp_path):
    invoke("init", tmp_path / "ws")
    assert invoke("resume", "--root", tmp_path / "ws").exit_code == 2


def test_held_lock_exits_3(tmp_path):
    root = tmp_path / "ws"
    invoke("init", root, "--template", "toy-anderson")
    with filelock.FileLock(str(root / LOCK_FILE)):
        assert invoke("run", "--root", root).exit_code == 3


def test_paused_run_exits_1_and_resume_finishes(tmp_path):
    root = tmp_path / "ws"
    invoke("init", root, "--template", "toy-anderson")
    assert invoke("run", "--root", root, "--pause-after", "0", "--replay").exit_code == 1
    assert invoke("checkpoint", "--root", root, "mid").exit_code == 0
    assert invoke("resume", "--root", root, "--replay").exit_code == 0
    assert invoke("resume", "--root", root).exit_code == 2
    assert invoke("branch", "--root", root, "mid", tmp_path / "b").exit_code == 0
    assert status_view(tmp_path / "b")["phase"] == "proving"
    assert invoke("branch", "--root", root, "missing", tmp_path / "c").exit_code == 3


def test_guide_and_ingest(tmp_path):
    root = tmp_path / "ws"
    invoke("init", root)
    note = tmp_path / "hint.md"
    note.write_text("# Try refl\n")
    r = invoke("guide", "--root", root, "--json", note)
    assert json.loads(r.output) == {"path": "routes/guidance/hint.md"}
    r = invoke("ingest", "--root", root, note)
    assert r.exit_code == 0 and "Try refl" in r.output
    assert invoke("ingest", "--root", root, tmp_path / "nope.md").exit_code == 3


def test_replay_reports_identical(tmp_path):
    root = tmp_path / "ws"
    invoke("init", root, "--template", "toy-anderson")
    invoke("run", "--root", root, "--replay")
    r = invoke("replay", "--root", root, "--json")
    assert r.exit_code == 0 and json.loads(r.output)["identical"] is True
