import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from avisa import synthetic
from avisa.dataset import Corpus, Outcome, TestCase

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def make_case(cid, outcome=Outcome.INEFFECTIVE, technique="t", road=None, telemetry=None, attributes=None):
    road = np.array([(0.0, 0.0), (10.0, 0.0), (20.0, 5.0)]) if road is None else road
    telemetry = {"steering": np.array([0.0, 0.1, -0.1])} if telemetry is None else telemetry
    return TestCase(cid, technique, road, outcome, telemetry, attributes or {})


@pytest.fixture(scope="session")
def small_corpus() -> Corpus:
    return synthetic.generate_corpus(300, 7)


@pytest.fixture(scope="session")
def frozen_corpus() -> Corpus:
    """The frozen planted corpus: n = 2000, seed 42."""
    return synthetic.generate_corpus(2000, 42)


# -- acceptance summary: one pass/fail line per criterion --------------------------

_criteria: dict[str, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion this test belongs to")


def pytest_runtest_logreport(report):
    marks = getattr(report, "criterion", None)
    if marks is None:
        return
    entry = _criteria.setdefault(marks, {"passed": 0, "failed": 0, "skipped": 0, "seconds": 0.0})
    entry["seconds"] += report.duration
    if report.when == "call" or report.outcome != "passed":
        entry[report.outcome] += 1


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        outcome.get_result().criterion = mark.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_criteria, key=lambda s: int(s[1:])):
        e = _criteria[name]
        if e["failed"]:
            verdict = "FAIL"
        elif e["passed"]:
            verdict = "PASS"
        else:
            verdict = "SKIP"
        terminalreporter.write_line(
            f"{name} {verdict}  ({e['passed']} passed, {e['failed']} failed, {e['skipped']} skipped, "
            f"{e['seconds']:.1f}s)")
