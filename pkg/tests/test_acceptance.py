"""Acceptance criteria, one test per criterion.

Each test runs the corresponding harvestctl suite; the measured value, bound
and verdict of every check are printed in the terminal summary (see
conftest.py).  Nothing here is relaxed relative to the suite: a criterion
that the physics does not satisfy fails.
"""

import pytest

from harvestlab import harvestctl as hc

CRITERIA = [
    ("01", "local-closed-form"),
    ("02", "nonlocal-closed-form"),
    ("03", "nonselective-identity"),
    ("04", "nonorthogonal-invariance"),
    ("05", "orthogonal-fig2"),
    ("06", "orthogonal-fig3"),
    ("07", "orthogonal-fig5"),
    ("08", "c-between"),
    ("09", "transition-fig7"),
    ("10", "transition-far"),
    ("11", "transition-fig9"),
    ("12", "perturbative-vs-exact"),
    ("13", "special-functions"),
    ("14", "determinism"),
    ("fault", "fault-injection"),
]

REPORT = []


@pytest.mark.parametrize("number, suite", CRITERIA, ids=[f"{n}-{s}" for n, s in CRITERIA])
def test_criterion(number, suite):
    checks = hc.SUITES[suite]()
    REPORT.extend(c.line() for c in checks)
    failed = [c.line() for c in checks if not c.passed]
    assert not failed, "\n".join(failed)
