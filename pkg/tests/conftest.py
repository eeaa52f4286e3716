import re

import pytest

_CRITERION = re.compile(r"test_criterion_(\d+)_(\w+?)(?:\[|$)")
_outcomes: dict[int, dict] = {}

NAMES = {
    1: "reward exactness",
    2: "operator oracles",
    3: "mutation statistics",
    4: "reduction to GA / NS",
    5: "determinism across workers",
    6: "gamma dynamics",
    7: "deceptive maze trends",
    8: "sparse maze trends",
    9: "adaptive vs fixed gamma",
    10: "budget accounting",
}


def _entry(nodeid):
    m = _CRITERION.search(nodeid)
    num = int(m.group(1))
    return _outcomes.setdefault(num, {"name": NAMES.get(num, m.group(2)), "failed": [], "ran": False})


def pytest_runtest_logreport(report):
    if not _CRITERION.search(report.nodeid):
        return
    entry = _entry(report.nodeid)
    if report.when == "call":
        entry["ran"] = True
    if report.failed:
        entry["failed"].append(report.nodeid.split("::")[-1])
    elif report.skipped:
        entry["failed"].append(report.nodeid.split("::")[-1] + " (skipped)")


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_outcomes):
        entry = _outcomes[num]
        ok = entry["ran"] and not entry["failed"]
        line = f"criterion {num:2d} {entry['name']:<28s} {'PASS' if ok else 'FAIL'}"
        if entry.get("details"):
            line += "  " + "; ".join(entry["details"])
        if entry["failed"]:
            line += "  [failed: " + ", ".join(entry["failed"]) + "]"
        terminalreporter.write_line(line)


@pytest.fixture
def detail(request):
    """Attach measured numbers to the criterion's summary line."""
    return _entry(request.node.nodeid).setdefault("details", []).append
