"""Acceptance gate: one test per numbered criterion, each at its stated tolerance.

Every test prints a single ``[PASS]``/``[FAIL]`` line (shown even under
output capture) and then asserts the criterion; runtime limits are part of
the pass flag.
"""

from __future__ import annotations

import pytest

from quasiconv.portfolio import CRITERIA, run_criterion


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    r = run_criterion(number)
    with capsys.disabled():
        print(f"\n{r.line()} [{r.runtime:.2f}s / limit {r.time_limit:g}s]")
    assert r.passed, r.line()
