"""Shared fixtures and the acceptance-criteria summary hook."""
import numpy as np
import pytest

from cpd.baselines import ReferencePolicy, reference_solution
from cpd.fields import builtin_general_field, resolve_field
from cpd.rotations import Linearization

BENCH_X0 = np.array([1 / 3, 1 / 4, 1 / 2])
BENCH_V0 = np.array([2 / 5, 2 / 3, 1.0])

# criterion number -> (verdict string, detail) recorded by test_acceptance
ACCEPTANCE_RESULTS = {}


@pytest.fixture(scope="session")
def bench_x0():
    return BENCH_X0.copy()


@pytest.fixture(scope="session")
def bench_v0():
    return BENCH_V0.copy()


@pytest.fixture(scope="session")
def general_field():
    return builtin_general_field()


@pytest.fixture(scope="session")
def general_lin(general_field):
    return Linearization.from_field(general_field, BENCH_X0)


class _RefStore:
    """Session-wide cache of oracle endpoints keyed by (field, eps)."""

    def __init__(self):
        self._store = {}

    def get(self, field_id, eps, T=1.0):
        key = (field_id, float(eps), float(T))
        if key not in self._store:
            fld = resolve_field(field_id, eps)
            self._store[key] = reference_solution(
                fld, eps, T, BENCH_X0, BENCH_V0, ReferencePolicy())
        return self._store[key]


@pytest.fixture(scope="session")
def refs():
    return _RefStore()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_RESULTS):
        verdict, detail = ACCEPTANCE_RESULTS[num]
        tr.write_line(f"criterion {num}: {verdict}  {detail}")
