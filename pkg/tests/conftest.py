"""Shared test plumbing: acceptance-criterion bookkeeping.

Each acceptance test registers its criterion verdict here; a terminal
summary section prints one PASS/FAIL line per criterion at the end of the
run regardless of output capturing.
"""

_CRITERIA: list[tuple[str, bool, list[str]]] = []


def record_criterion(name: str, failures: list[str]) -> None:
    """Register a criterion outcome and fail the test if anything failed."""
    _CRITERIA.append((name, not failures, failures))
    assert not failures, f"{name}: " + "; ".join(failures)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, failures in _CRITERIA:
        line = f"{'PASS' if ok else 'FAIL'}  {name}"
        if failures:
            line += "  [" + "; ".join(failures[:3]) + "]"
        terminalreporter.write_line(line)
