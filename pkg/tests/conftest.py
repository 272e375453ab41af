import pytest

from lowrisk.belief import BetaParams
from lowrisk.status import Thresholds


@pytest.fixture
def routine_prior() -> BetaParams:
    """Two periods of 5000 inspections with 3 contaminated items each."""
    return BetaParams.from_counts(10000, 6)


@pytest.fixture
def routine_thresholds(routine_prior) -> Thresholds:
    return Thresholds.tuned(routine_prior, 0.005, 0.95)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_report():
    """Print (and keep for the terminal summary) one PASS/FAIL line per criterion."""

    def report(criterion: str, ok: bool, detail: str) -> bool:
        line = f"{criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
