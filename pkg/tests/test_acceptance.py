"""Acceptance suite: one printed PASS/FAIL line per criterion, at the documented tolerances.

Run with ``pytest -s tests/test_acceptance.py`` to see the lines, or ``stein-audit demo``.
"""

import pytest

from stein_audit.acceptance import CRITERIA


@pytest.mark.parametrize("criterion", CRITERIA, ids=lambda c: c.__name__)
def test_criterion(criterion):
    res = criterion()
    print(res.line())
    assert res.passed, res.line()
