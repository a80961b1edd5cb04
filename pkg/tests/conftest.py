from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from codedchain.group_params import profile_params, toy_params  # noqa: E402

_acceptance: dict[str, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): one acceptance criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    entry = _acceptance.setdefault(number, {"title": title, "passed": True, "ran": False, "notes": []})
    if report.when == "call" or (report.when == "setup" and not report.passed):
        entry["ran"] = True
        if not report.passed:
            entry["passed"] = False
            entry["notes"].append(item.name)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance, key=lambda n: int(n)):
        entry = _acceptance[number]
        if not entry["ran"]:
            status = "NOT RUN"
        else:
            status = "PASS" if entry["passed"] else "FAIL"
        line = f"criterion {number}: {status} - {entry['title']}"
        if entry["notes"]:
            line += f" (failing: {', '.join(entry['notes'])})"
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def toy():
    return toy_params()


@pytest.fixture(scope="session")
def small():
    """Reduced-width group, k=4, 1 KB blocks."""
    return profile_params("test", 4, 1024)


@pytest.fixture(scope="session")
def production():
    """Full-size group, k=32, m=64."""
    return profile_params("production", 32, 65528)
