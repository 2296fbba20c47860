"""Shared fixtures and the acceptance-criteria terminal report."""

import numpy as np
import pytest

ACCEPTANCE_RESULTS = []


def record_criterion(name: str, passed: bool, detail: str = "") -> None:
    ACCEPTANCE_RESULTS.append((name, bool(passed), detail))


def check_criterion(name: str, passed: bool, detail: str = "") -> None:
    """Record one acceptance line, then enforce it."""
    record_criterion(name, passed, detail)
    assert passed, f"{name}: {detail}"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE_RESULTS:
        status = "PASS" if passed else "FAIL"
        suffix = f"  ({detail})" if detail else ""
        terminalreporter.write_line(f"[{status}] {name}{suffix}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240809)
