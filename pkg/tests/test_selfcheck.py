import pytest

from fisheyekit.selfcheck import CHECKS, run_selfcheck


def test_clean_run_passes():
    results = run_selfcheck()
    assert [r.name for r in results] == list(CHECKS)
    assert all(r.passed for r in results), [r.detail for r in results if not r.passed]


@pytest.mark.parametrize("name", list(CHECKS))
def test_injection_fails_only_target(name):
    failed = [r.name for r in run_selfcheck(inject=name) if not r.passed]
    assert failed == [name]


def test_details_deterministic():
    a = [(r.name, r.passed, r.detail) for r in run_selfcheck()]
    b = [(r.name, r.passed, r.detail) for r in run_selfcheck()]
    assert a == b


def test_unknown_injection():
    with pytest.raises(KeyError):
        run_selfcheck(inject="nonexistent")
