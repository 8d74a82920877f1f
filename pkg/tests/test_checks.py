import pytest

from setree.checks import SUITE, CheckResult, check_conductance_bound, run_suite

FAST = [name for name in SUITE if name != "gradient"]


@pytest.mark.parametrize("name", FAST)
def test_check_passes(name):
    result = SUITE[name]()
    assert result.passed, result.line()


def test_crashing_check_is_reported(monkeypatch):
    def boom():
        raise RuntimeError("kaput")

    monkeypatch.setitem(SUITE, "boom", boom)
    (result,) = run_suite(["boom"])
    assert not result.passed
    assert "kaput" in result.detail


def test_literal_conductance_bound_has_violations():
    result = check_conductance_bound(literal=True)
    assert not result.passed
    assert result.measured < 0


def test_result_line_format():
    line = CheckResult("demo", True, 1e-12, 1e-9, "fine").line()
    assert line.startswith("PASS") and "demo" in line and "fine" in line
