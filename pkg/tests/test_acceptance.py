"""Acceptance criteria at full scale.

Each criterion runs at its stated sample sizes and tolerances and prints one
``criterion N [PASS|FAIL] title`` line. Criteria with a runtime budget also
assert it. The shared context caches ensembles that several criteria reuse,
so the module runs as one session (about twenty minutes on one core).
"""

import json

import pytest

from penfbm.acceptance import CRITERIA, RUNTIME_CAPS, Context, run_criterion

pytestmark = pytest.mark.acceptance


@pytest.fixture(scope="module")
def context():
    return Context(scale=1.0, seed=0, workers=1)


@pytest.mark.parametrize("cid", sorted(CRITERIA))
def test_criterion(context, cid, capsys):
    result = run_criterion(context, cid)
    with capsys.disabled():
        print(f"\n{result.line()} ({result.runtime:.1f} s)")
        print(json.dumps(result.as_dict()["details"], sort_keys=True, default=str)[:2000])
    assert result.passed, result.details
    if cid in RUNTIME_CAPS:
        assert result.runtime <= RUNTIME_CAPS[cid], f"runtime {result.runtime:.0f} s exceeds {RUNTIME_CAPS[cid]:.0f} s"
