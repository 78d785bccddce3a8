"""Acceptance gate: every criterion suite must pass at its stated tolerance.

Each test prints one pass/fail line (plus per-check margins) and asserts
the suite outcome, wall-time budget included.  The same suites are
reachable from the command line via `ckit accept --suite <name>`.
"""

import pytest

from ckit.accept import SUITES, check_acceptance


@pytest.mark.parametrize("name", list(SUITES))
def test_criterion(name, capsys):
    (report,) = check_acceptance(name)
    with capsys.disabled():
        print("\n" + report.summary_line())
        for line in report.detail_lines():
            print("  " + line)
    assert report.passed, report.summary_line()
