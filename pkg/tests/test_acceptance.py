"""Acceptance criteria 1-12 at their stated sizes and tolerances.

Each test prints one PASS/FAIL line; a summary of all lines is repeated at the
end of the session.
"""
from __future__ import annotations

import pytest

from torusfrag.validation import run_suite

CRITERIA = [
    (1, "vacancy"),
    (2, "capacity"),
    (3, "scaling"),
    (4, "hitting-time"),
    (5, "quasistat"),
    (6, "hitting-dist"),
    (7, "excursions"),
    (8, "mixing"),
    (9, "phase"),
    (10, "sandwich"),
    (11, "uniqueness"),
    (12, "determinism"),
]


@pytest.mark.acceptance
@pytest.mark.parametrize("criterion,suite", CRITERIA, ids=[f"AC{n}-{s}" for n, s in CRITERIA])
def test_acceptance(criterion, suite, capsys, acceptance_log):
    rep = run_suite(suite, seed=0)
    assert rep.criterion == criterion
    line = f"{rep.line()}  [{rep.runtime_s:.1f}s]"
    acceptance_log.append(line)
    with capsys.disabled():
        print(f"\n{line}")
    assert rep.passed, line
