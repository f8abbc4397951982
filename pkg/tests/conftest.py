import re

import pytest

from vstates.contour import PatchConfig
from vstates.solver import SolveOptions, newton_solve

CRITERIA = {
    1: "point-vortex speeds",
    2: "kernel identity suite",
    3: "special-function cross-validation",
    4: "linearization equivalence",
    5: "determinant regions",
    6: "end-to-end solve, alpha = 0",
    7: "end-to-end solve, alpha = 0.5 annulus",
    8: "independent stationarity oracle",
    9: "symmetry and structure",
    10: "travelling pair",
}

_outcomes: dict[int, list[tuple[str, str]]] = {}
_notes: dict[int, list[str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    m = re.search(r"test_criterion_(\d+)", report.nodeid)
    if not m:
        return
    if report.when == "call" or report.outcome != "passed":
        _outcomes.setdefault(int(m.group(1)), []).append(
            (report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(CRITERIA):
        runs = _outcomes.get(k)
        if not runs:
            tr.write_line(f"criterion {k:2d}  NOT RUN  {CRITERIA[k]}")
            continue
        failed = [name for name, outcome in runs if outcome != "passed"]
        status = "FAIL" if failed else "PASS"
        line = f"criterion {k:2d}  {status}  {CRITERIA[k]}"
        if failed:
            line += "  (failing: " + ", ".join(failed) + ")"
        tr.write_line(line)
        for note in _notes.get(k, []):
            tr.write_line(f"              {note}")


@pytest.fixture
def note():
    def add(criterion: int, text: str) -> None:
        _notes.setdefault(criterion, []).append(text)
    return add


@pytest.fixture(scope="session")
def solved_a0():
    """The reference alpha = 0 co-rotating solve."""
    return newton_solve(PatchConfig(0.0, 0.5, 0.5, 0.05), opts=SolveOptions(J=32, M=256))


@pytest.fixture(scope="session")
def solved_travelling():
    cfg = PatchConfig(0.0, 0.5, 0.5, 0.05, mode="travelling")
    return newton_solve(cfg, opts=SolveOptions(J=32, M=256))
