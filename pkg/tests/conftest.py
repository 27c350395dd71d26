from pathlib import Path

import pytest

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion covered by the test")


@pytest.fixture
def configs_dir():
    return CONFIGS


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    label = marker.args[0]
    failed = report.failed
    if report.when == "call" or failed:
        prev = _criteria.get(label, (True, item.name))
        _criteria[label] = (prev[0] and not failed, item.name)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_criteria, key=lambda s: (int("".join(c for c in s if c.isdigit()) or 0), s)):
        ok, name = _criteria[label]
        terminalreporter.write_line(f"criterion {label:<4} {'PASS' if ok else 'FAIL'}  ({name})")
