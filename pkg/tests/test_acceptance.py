"""Acceptance criteria 1-12, each at its stated tolerance.

Every test prints one ``criterion N PASS|FAIL ...`` line. The lines are also
repeated in the terminal summary, so they show up without ``-s``.
"""
import pytest

from scalefree.harness.acceptance import CRITERIA

RESULT_LINES = {}


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    res = CRITERIA[number]()
    RESULT_LINES[number] = res.line()
    print(res.line())
    assert res.passed, res.line()
