import os

import pytest


def pytest_configure(config):
    config._criteria_lines = []


@pytest.fixture
def criterion(request):
    """Record a one-line PASS/FAIL result for an acceptance criterion."""
    lines = request.config._criteria_lines

    def record(number, title, ok, detail=""):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}  {detail}".rstrip()
        lines.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_criteria_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)


@pytest.fixture(autouse=True, scope="session")
def _single_worker():
    os.environ.setdefault("LEVYIU_WORKERS", "1")
    yield
