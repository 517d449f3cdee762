"""Acceptance criteria, one test per criterion, evaluated with strict slope semantics.

Each test records a PASS/FAIL summary line plus its individual checks; the
lines are printed in the terminal summary at the end of the run.
"""

import pytest

from covdyn import acceptance as acc

SUMMARY_LINES = []
KEYS = ["1(a)", "1(b)", "1(c)", "1(d)", "2", "3", "4", "5", "6", "7", "8", "9"]


def _evaluate(key):
    if key.startswith("1("):
        return acc.criterion_1_scenario(key[2])
    return acc.CRITERIA[key]()


@pytest.fixture(scope="module")
def results():
    return {}


@pytest.mark.parametrize("key", KEYS)
def test_criterion(key, results):
    res = results.setdefault(key, _evaluate(key))
    lines = res.lines(strict=True)
    SUMMARY_LINES.extend(lines)
    print("\n".join(lines))
    failing = [c.line() for c in res.checks if not c.passed]
    assert res.passed(strict=True), f"criterion {key} failing checks: {failing}"
