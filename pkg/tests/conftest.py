import pytest
from hypothesis import HealthCheck, settings

# property tests run at least this many cases; see test_acceptance.py (AC9)
MIN_CASES = 1000

settings.register_profile(
    "invariants",
    max_examples=MIN_CASES,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("invariants")

_AC_LINES: list[str] = []


@pytest.fixture
def report_line():
    """Record a one-line acceptance verdict; echoed in the terminal summary."""

    def emit(line: str):
        print(line)
        _AC_LINES.append(line)

    return emit


# outcome of every invariant-marked test in this session, by node id
INVARIANT_RESULTS: dict[str, str] = {}
INVARIANT_COLLECTED: list[str] = []


def pytest_collection_modifyitems(config, items):
    # acceptance checks run last so AC9 can read this session's invariant results
    items.sort(key=lambda it: it.get_closest_marker("acceptance") is not None)
    INVARIANT_COLLECTED[:] = [it.nodeid for it in items if it.get_closest_marker("invariant")]


def pytest_runtest_logreport(report):
    if "invariant" in report.keywords and (report.when == "call" or report.outcome != "passed"):
        INVARIANT_RESULTS[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if _AC_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _AC_LINES:
            terminalreporter.write_line(line)
