import re

import pytest

from knightlq.model import REFERENCE_MODEL, AgentParams, AmbiguityBounds

_AC_RESULTS = {}
_AC_DETAILS = {}
_AC_NAME = re.compile(r"test_ac(\d+)_")


@pytest.fixture
def reference_model():
    return REFERENCE_MODEL


@pytest.fixture
def bounds_unit():
    return AmbiguityBounds(0.01, 1.0)


@pytest.fixture
def agent_default():
    return AgentParams(0.6, 0.3)


@pytest.fixture
def ac_detail(request):
    """Attach a one-line measurement to the current acceptance test's summary line."""
    match = _AC_NAME.search(request.node.name)

    def record(text):
        if match:
            _AC_DETAILS[int(match.group(1))] = text

    return record


def pytest_runtest_logreport(report):
    match = _AC_NAME.search(report.nodeid)
    if not match:
        return
    ac = int(match.group(1))
    if report.when == "call" or report.failed:
        ok = report.passed if report.when == "call" else False
        _AC_RESULTS[ac] = _AC_RESULTS.get(ac, True) and ok


def pytest_terminal_summary(terminalreporter):
    if not _AC_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for ac in sorted(_AC_RESULTS):
        status = "PASS" if _AC_RESULTS[ac] else "FAIL"
        detail = _AC_DETAILS.get(ac, "")
        terminalreporter.write_line(f"AC{ac:<2} {status}  {detail}".rstrip())
