"""
Acceptance gate: all ten criteria at the reference configuration
(N=128, T=0.5, M=500, alpha=0.75).

Each experiment runs once per session; every criterion prints one
PASS/FAIL line, collected again in the terminal summary. Run directly with
``python3 tests/test_acceptance.py`` for the table alone.
"""
import sys

import pytest

from activescalar.config import load_config
from activescalar.experiments import CRITERIA_NAMES, CRITERIA_SOURCE, EXPERIMENTS

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script
    ACCEPTANCE_LINES = {}

_RESULTS = {}


def run(sub):
    if sub not in _RESULTS:
        _RESULTS[sub] = EXPERIMENTS[sub](load_config())
    return _RESULTS[sub]


def verdict(cid):
    crit = [c for c in run(CRITERIA_SOURCE[cid]).criteria if c.id == cid]
    assert len(crit) == 1
    c = crit[0]
    line = (f"criterion {cid:2d} {'PASS' if c.passed else 'FAIL'}  {CRITERIA_NAMES[cid]}: "
            f"value={float(c.value):.6g}  [{c.threshold}]")
    ACCEPTANCE_LINES[cid] = line
    return c, line


@pytest.mark.slow
@pytest.mark.parametrize("cid", sorted(CRITERIA_SOURCE))
def test_criterion(cid):
    c, line = verdict(cid)
    print(line)
    assert c.passed, f"{line}\n{c.detail}"


if __name__ == "__main__":
    failed = 0
    for cid in sorted(CRITERIA_SOURCE):
        c, line = verdict(cid)
        print(line, flush=True)
        failed += not c.passed
    sys.exit(1 if failed else 0)
