from __future__ import annotations

import re

_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)", report.nodeid)
    if not m:
        return
    if report.when == "call" or report.failed:
        k = int(m.group(1))
        if k not in _CRITERIA or _CRITERIA[k][1] == "PASS":
            _CRITERIA[k] = (m.group(2).replace("_", " "), "PASS" if report.passed else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        name, status = _CRITERIA[k]
        terminalreporter.write_line(f"criterion {k} ({name}): {status}")
