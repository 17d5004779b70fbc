from __future__ import annotations

import json
import sys
from pathlib import Path

import pytest

from raclab.config import Config
from raclab.harness import load_instances
from raclab.registry import bundled

FIXTURES = Path(__file__).parent / "fixtures"
sys.path.insert(0, str(Path(__file__).parent))

_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        prev = _criteria.get(number, (title, "PASS"))[1]
        status = "PASS" if report.outcome == "passed" and prev == "PASS" else "FAIL"
        _criteria[number] = (title, status)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(_criteria):
        title, status = _criteria[number]
        terminalreporter.write_line(f"criterion {number:>2} {status}: {title}")


@pytest.fixture(scope="session")
def registry():
    return bundled()


@pytest.fixture(scope="session")
def bw(registry):
    return registry.get("blocksworld")


@pytest.fixture(scope="session")
def depots(registry):
    return registry.get("depots")


@pytest.fixture(scope="session")
def grippers(registry):
    return registry.get("grippers")


@pytest.fixture(scope="session")
def cfg():
    return Config(pipeline_mode="structured", parallelism=4)


@pytest.fixture(scope="session")
def bw12(registry):
    return load_instances(FIXTURES / "bw12.jsonl", registry)


@pytest.fixture(scope="session")
def mixed20(registry):
    return load_instances(FIXTURES / "mixed20.jsonl", registry)


@pytest.fixture(scope="session")
def mislabeled(registry):
    return load_instances(FIXTURES / "depots_mislabeled.jsonl", registry)[0]


@pytest.fixture(scope="session")
def sequences():
    return [json.loads(line) for line in (FIXTURES / "sequences.jsonl").read_text().splitlines() if line.strip()]


def domain_source(name: str) -> str:
    from importlib import resources

    return (resources.files("raclab") / "data" / "domains" / name / "domain.pddl").read_text()
