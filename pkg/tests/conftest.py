"""Shared fixtures; the full-simulation analyses are computed once per session."""

from __future__ import annotations

import functools

import numpy as np
import pytest

from eluniq import estimators, priors
from eluniq.model import NumericalLimitError
from eluniq.resolution import resolution_cell
from eluniq.simulation import BOX_LIMITS, make_problem, paper_system
from eluniq.uniqueness import uniqueness_map

KINDS = ("ec", "nn", "box")


class SimulationCache:
    """Lazily computed analyses of the reference simulation."""

    def __init__(self):
        self.system, self.x_true = paper_system()

    @functools.cache
    def problem(self, kind):
        return make_problem(self.system, kind)

    @functools.cache
    def uniqueness(self, kind):
        """List of (bounds, certificate) pairs for every element."""
        return uniqueness_map(self.problem(kind), with_certificates=True)

    @functools.cache
    def cells(self, kind):
        """Resolution cells keyed by element; failed elements map to the error text."""
        out = {}
        for k in range(self.system.n):
            try:
                out[k] = resolution_cell(self.problem(kind), k)
            except NumericalLimitError as exc:
                out[k] = str(exc)
        return out

    @functools.cache
    def estimates(self):
        box = priors.BoxSpec.uniform(self.system.n, *BOX_LIMITS)
        return {
            "l1": estimators.basis_pursuit(self.system),
            "nnls": estimators.nnls_estimate(self.system),
            "boxls": estimators.box_minnorm_estimate(self.system, box),
        }


@pytest.fixture(scope="session")
def sim():
    return SimulationCache()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_VERDICTS: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def verdict():
    """Record ``(criterion, passed, detail)`` for the end-of-run summary, then assert."""

    def record(number: int, passed: bool, detail: str):
        _VERDICTS[number] = (bool(passed), detail)
        assert passed, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_VERDICTS):
        passed, detail = _VERDICTS[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
