import re

_CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)$")
_outcomes = {}


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m:
        return
    key = (int(m.group(1)), m.group(2))
    if report.failed:
        message = report.longrepr.reprcrash.message if hasattr(report.longrepr, "reprcrash") else str(report.longrepr)
        _outcomes[key] = ("FAIL", message.splitlines()[0])
    elif report.when == "call" and key not in _outcomes:
        _outcomes[key] = ("PASS", "")


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for (number, name), (status, detail) in sorted(_outcomes.items()):
        line = f"criterion {number:2d} {name.replace('_', ' ')}: {status}"
        terminalreporter.write_line(line + (f" ({detail})" if detail else ""))
