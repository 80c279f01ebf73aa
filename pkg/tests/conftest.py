import os
import warnings

import numpy as np
import pytest

os.environ.setdefault("SCRAMBLE_SENSE_THREADS", "1")

_CRITERIA: dict[int, str] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion."""

    def record(number: int, title: str, ok: bool, detail: str = "") -> bool:
        status = "PASS" if ok else "FAIL"
        _CRITERIA[number] = f"criterion {number:2d} {status}  {title}" + (f"  ({detail})" if detail else "")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[number])


@pytest.fixture(autouse=True)
def _quiet_circuit_count_warnings():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*circuits are fewer than.*")
        yield
