from __future__ import annotations

from functools import lru_cache

import pytest

from diqss.noise import NoiseParams, estimate_key_error_rate

MC_ROUNDS = 1_000_000
MC_SEED = 20240607

_acceptance_lines: list[str] = []


@lru_cache(maxsize=None)
def key_error_estimate(fidelity: float, efficiency: float, rounds: int = MC_ROUNDS):
    """Shared 10^6-round estimates so the grid test and the acceptance run
    do not repeat the same simulation."""
    return estimate_key_error_rate(NoiseParams(fidelity, efficiency), rounds, seed=MC_SEED)


@pytest.fixture
def criterion():
    """Record one acceptance line, then assert it."""

    def record(number: int, title: str, passed: bool, detail: str) -> None:
        _acceptance_lines.append(f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title} | {detail}")
        assert passed, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
