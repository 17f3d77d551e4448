from importlib import resources
from pathlib import Path

import pytest

from memexplorer.catalog import load_catalog
from memexplorer.design import DesignPoint
from memexplorer.workload import Workload

DATA = Path(str(resources.files("memexplorer") / "data"))


@pytest.fixture(scope="session")
def catalog():
    return load_catalog()


@pytest.fixture(scope="session")
def osworld():
    return Workload.load(DATA / "workloads" / "osworld_l.json")


@pytest.fixture(scope="session")
def bfcl():
    return Workload.load(DATA / "workloads" / "bfcl_wsb.json")


@pytest.fixture(scope="session")
def designs(catalog):
    return {p.stem: DesignPoint.load(p, catalog) for p in sorted((DATA / "designs").glob("*.json"))}


def workload_path(name: str) -> Path:
    return DATA / "workloads" / f"{name}.json"


def design_path(name: str) -> Path:
    return DATA / "designs" / f"{name}.json"


# one line per acceptance criterion, printed at the end of the session
CRITERIA: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> str:
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    CRITERIA[number] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[n])
