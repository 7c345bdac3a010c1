"""Acceptance criteria 1-12, each at its stated tolerance and time budget.

Run with ``pytest -s tests/test_acceptance.py`` to see one pass/fail line per
criterion.
"""

import pytest

from nodal_lab.acceptance import CRITERIA

pytestmark = pytest.mark.acceptance


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    res = CRITERIA[number]()
    print(res.line())
    assert res.passed, res.line()
