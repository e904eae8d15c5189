from __future__ import annotations

import pytest

from helpers import copy_fixture, orchestrator, toy_workspace

_ACCEPTANCE: dict[str, str] = {}


@pytest.fixture
def toy_ws(tmp_path):
    return toy_workspace(tmp_path / "ws")


@pytest.fixture
def passing_ws(tmp_path):
    root = toy_workspace(tmp_path / "ws")
    assert orchestrator(root).run() == "done"
    return root


@pytest.fixture
def two_groups_ws(tmp_path):
    return copy_fixture("two-groups", tmp_path / "ws")


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::")[-1]
        _ACCEPTANCE[name] = "PASS" if report.outcome == "passed" else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE, key=lambda n: int(n.split("_")[2]) if n.split("_")[2].isdigit() else 99):
        terminalreporter.write_line(f"{_ACCEPTANCE[name]}  {name}")
