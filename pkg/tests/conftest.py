import time

import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=100, deadline=None)
settings.load_profile("default")

_acceptance: list[tuple[str, str, str, float]] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_call(item):
    start = time.perf_counter()
    yield
    item._criterion_elapsed = time.perf_counter() - start


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker and report.when == "call":
        number, text = marker.args
        status = "PASS" if report.passed else "FAIL"
        _acceptance.append((str(number), status, text, getattr(item, "_criterion_elapsed", 0.0)))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number, status, text, elapsed in sorted(_acceptance, key=lambda r: int(r[0])):
        terminalreporter.write_line(f"criterion {number:>2}: {status}  ({elapsed:6.2f}s)  {text}")
