"""Acceptance gate: every release-blocking criterion, one pass/fail line each.

Run with -s (or read the captured output) to see the per-criterion lines.
Each criterion is self-contained and states its own tolerance in the detail
string it prints.
"""

import pytest

from tailkit.acceptance import CRITERIA

pytestmark = pytest.mark.filterwarnings("ignore:fewer than 100 samples")


@pytest.mark.parametrize("crit", CRITERIA, ids=lambda c: f"c{c.number}-{c.name}")
def test_acceptance(crit, capfd):
    passed, detail = crit.run()
    status = "PASS" if passed else "FAIL"
    with capfd.disabled():
        print(f"[{status}] criterion {crit.number} {crit.name}: {detail}")
    assert passed, f"criterion {crit.number} {crit.name}: {detail}"
