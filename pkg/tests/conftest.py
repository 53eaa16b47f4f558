import re

import pytest

_CRITERIA: dict[int, tuple[str, str, str]] = {}
_PATTERN = re.compile(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)")


@pytest.fixture
def note(request):
    """Attach a one-line measurement to the acceptance summary."""
    def add(text):
        request.node.user_properties.append(("note", text))
    return add


def pytest_runtest_logreport(report):
    m = _PATTERN.search(report.nodeid)
    if not m or (report.when != "call" and report.passed):
        return
    n = int(m.group(1))
    if n in _CRITERIA and _CRITERIA[n][0] == "FAIL":
        return
    notes = "; ".join(v for k, v in report.user_properties if k == "note")
    _CRITERIA[n] = ("PASS" if report.passed else "FAIL", m.group(2).replace("_", " "), notes)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        status, name, notes = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d} {status}  {name}" + (f"  [{notes}]" if notes else ""))
