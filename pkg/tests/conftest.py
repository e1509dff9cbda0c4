from pathlib import Path

import pytest

from simdrive.cli import simrun

FIXTURES = Path(__file__).parent / "fixtures"


class Mission:
    scenario = str(FIXTURES / "urban-block.scn")
    situation = str(FIXTURES / "urban-block.sit")
    config = str(FIXTURES / "urban-block.conf")
    suite = str(FIXTURES / "urban-block.suite")


@pytest.fixture(scope="session")
def mission():
    return Mission


@pytest.fixture(scope="session")
def mission_run(tmp_path_factory):
    """One reference simrun shared by the tests that only inspect its outputs."""
    out = tmp_path_factory.mktemp("mission")
    code, report = simrun(Mission.scenario, Mission.situation, Mission.config, Mission.suite, str(out))
    return code, report, out


def pytest_terminal_summary(terminalreporter):
    acceptance = __import__("sys").modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(acceptance.RESULTS):
        terminalreporter.write_line(acceptance.RESULTS[n])
