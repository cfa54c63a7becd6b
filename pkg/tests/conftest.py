import numpy as np
import pytest

from seqbin.models import JointSource


@pytest.fixture
def bsc_source():
    """Uniform binary U observed through a BSC(0.1) as side information."""
    return JointSource.binary_bsc(0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def record_criterion():
    """Log one PASS/FAIL line per acceptance criterion and return the verdict."""

    def record(label: str, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
