from __future__ import annotations

import logging

import numpy as np
import pytest

from edgeprob.core import CountMatrix, Partition

_ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    _ACCEPTANCE[number] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        passed, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture(autouse=True)
def _quiet_baseline_warnings(caplog):
    caplog.set_level(logging.ERROR, logger="edgeprob.baselines")


def random_partition(rng: np.random.Generator, n: int, p: int) -> Partition:
    """Random partition of ``n`` nodes into exactly ``p`` nonempty blocks."""
    b = np.concatenate([np.arange(p), rng.integers(0, p, n - p)])
    rng.shuffle(b)
    return Partition(b)


def random_counts(rng: np.random.Generator, n: int, m: int) -> CountMatrix:
    k = np.zeros((n, n))
    for _ in range(m):
        k[rng.integers(n), rng.integers(n)] += 1
    return CountMatrix(k)


def random_probability(rng: np.random.Generator, n: int, zeros: bool = False) -> np.ndarray:
    p = rng.random((n, n))
    if zeros:
        p[rng.random((n, n)) < 0.3] = 0.0
        if p.sum() == 0:
            p[0, 0] = 1.0
    return p / p.sum()
