import json
import os
import time

import hypothesis
import pytest

from safs.catalog import load_catalog
from safs.fixtures import fixture_paths
from safs.perfmodel import PerformanceModel

hypothesis.settings.register_profile("ci", max_examples=200, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=20, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))

_acceptance = []


@pytest.fixture(scope="session")
def catalog():
    return load_catalog()


@pytest.fixture(scope="session")
def model():
    return PerformanceModel()


@pytest.fixture(scope="session")
def web3_paths():
    return fixture_paths("web3")


@pytest.fixture
def web3_text(web3_paths):
    return web3_paths["template"].read_text()


@pytest.fixture
def web3_doc(web3_text):
    return json.loads(web3_text)


@pytest.fixture
def stopwatch():
    """Callable returning seconds elapsed since the fixture was created."""
    start = time.perf_counter()
    return lambda: time.perf_counter() - start


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when != "call":
        return
    ident, title = marker.args
    _acceptance.append((ident, title, report.outcome, report.duration))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for ident, title, outcome, duration in sorted(_acceptance, key=lambda r: int(r[0])):
        mark = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{mark}] criterion {ident}: {title} ({duration:.2f}s)")
