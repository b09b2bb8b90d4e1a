from pathlib import Path

import pytest

from logks.config import load_scenario

SCENARIO_DIR = Path(__file__).resolve().parents[1] / "src" / "logks" / "scenarios"
SWEEP_FILES = {"ks_sweep.yaml"}


def scenario_path(name: str) -> Path:
    return SCENARIO_DIR / f"{name}.yaml"


def shipped_scenarios():
    return sorted(p for p in SCENARIO_DIR.glob("*.yaml") if p.name not in SWEEP_FILES)


@pytest.fixture
def load():
    def _load(name):
        return load_scenario(scenario_path(name))[1]
    return _load


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = {}


def record_criterion(number: int, passed: bool, detail: str) -> str:
    line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
