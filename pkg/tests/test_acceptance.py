import pytest

from pyoblivious.acceptance import CHECKS, run_checks

pytestmark = pytest.mark.slow

def test_closed_form_checks():
    results = run_checks(seed=7, names=["check_storage", "check_cost", "check_amortized_c2", "check_items_c2"])
    assert len(results) == 4
    for result in results:
        assert result.passed, f"{result.name}: {result.detail}"

def test_quick_checklist():
    results = run_checks(seed=7, quick=True)
    assert len(results) == len(CHECKS)
    failed = [(r.name, r.detail) for r in results if not r.passed]
    assert failed == []
