import json
from pathlib import Path

import numpy as np
import pytest

from elastic_fusion.instance_io import Instance, read_instance

FIXTURES = Path(__file__).parent / "fixtures"


def fixture_text(name):
    return (FIXTURES / name).read_text()


@pytest.fixture(scope="session")
def eight():
    return read_instance(FIXTURES / "eight.tsp")


@pytest.fixture(scope="session")
def five():
    return read_instance(FIXTURES / "five.tsp")


@pytest.fixture(scope="session")
def ring10():
    return np.array(json.loads(fixture_text("ring10.json"))["w"])


@pytest.fixture(scope="session")
def square():
    return Instance.from_coords([(0, 0), (1, 0), (1, 1), (0, 1)], name="square")


def pytest_configure(config):
    config.acceptance_lines = []


@pytest.fixture
def report(request):
    """Record one PASS/FAIL line for the end-of-run summary."""
    def emit(label, ok, detail):
        line = f"{label}: {'PASS' if ok else 'FAIL'} ({detail})"
        request.config.acceptance_lines.append(line)
        print(line)
        return ok
    return emit


def pytest_terminal_summary(terminalreporter, config):
    if config.acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in config.acceptance_lines:
            terminalreporter.write_line(line)
