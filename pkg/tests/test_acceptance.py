"""Release gate: every acceptance criterion, one test each.

With -v the report shows one pass/fail line per criterion; the measured
numbers print alongside and appear in full on any failure.  The heavy
sampling runs are shared through a module-scoped context, so this module
costs a few minutes total, dominated by the hypercube scaling sweeps.
"""

import pytest

from proxmatch import acceptance


@pytest.fixture(scope="module")
def ctx():
    return acceptance.AcceptanceContext(seed=acceptance.DEFAULT_SEED)


_IDS = [f"c{cid:02d}-{name.replace(' ', '-').replace(';', '')}"
        for cid, name, _ in acceptance.CRITERIA]


@pytest.mark.parametrize("cid", [cid for cid, _, _ in acceptance.CRITERIA],
                         ids=_IDS)
def test_criterion(ctx, cid):
    result = acceptance.run_criterion(ctx, cid)
    print(result.line())
    assert result.error is None, result.line()
    assert result.passed, result.line()


def test_all_criteria_have_unique_ids():
    ids = [cid for cid, _, _ in acceptance.CRITERIA]
    assert ids == sorted(set(ids)) == list(range(1, 14))
