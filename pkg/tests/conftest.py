"""Shared fixtures and the acceptance summary printed after the run."""

import numpy as np
import pytest

from hmmequiv.model import canonical_m2, canonical_m2_independent, canonical_s2

_ACCEPTANCE_KEY = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = {}


@pytest.fixture
def acceptance(request):
    """Record ``(criterion, passed, detail)`` for the terminal summary."""
    results = request.config.stash[_ACCEPTANCE_KEY]

    def record(number: int, passed: bool, detail: str) -> bool:
        results[number] = (bool(passed), detail)
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_ACCEPTANCE_KEY, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in range(1, 11):
        if number in results:
            passed, detail = results[number]
            terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
        else:
            terminalreporter.write_line(f"criterion {number:2d}: NOT RUN")


@pytest.fixture
def m2():
    return canonical_m2()


@pytest.fixture
def m2_indep():
    return canonical_m2_independent()


@pytest.fixture
def s2():
    return canonical_s2()


@pytest.fixture
def rng():
    return np.random.default_rng(20241016)
