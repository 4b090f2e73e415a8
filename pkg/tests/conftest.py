import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line for an acceptance criterion; the lines are printed in the summary."""

    def record(criterion: str, ok: bool, detail: str) -> bool:
        _ACCEPTANCE.append(f"{'PASS' if ok else 'FAIL'}  criterion {criterion}: {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
