import pytest
import bqms as bq

sc = bq.scanners


def test_tolerance():
    """KEY=VAL with any float spelling"""
    assert sc.tolerance("equality=1e-8") == ("equality", 1e-8)
    assert sc.tolerance(" positivity = 2.5E-11 ") == ("positivity", 2.5e-11)
    assert sc.tolerance("condition=1000") == ("condition", 1000.0)
    assert sc.tolerance("cluster=.5") == ("cluster", 0.5)


def test_tolerance_errors():
    """Malformed overrides raise ParseError pointing at the bad column"""
    for text in ("equality", "equality=", "=1e-8", "equality=1e-8x", "equality=abc"):
        with pytest.raises(bq.util.ParseError) as e:
            sc.tolerance(text)
        assert e.value.line == 1
        assert e.value.column >= 1


def test_tolerances():
    """Every override is parsed and unknown keys are rejected"""
    assert sc.tolerances(["equality=1e-8", "hermitian=1e-9"]) == {"equality": 1e-8, "hermitian": 1e-9}
    assert sc.tolerances([]) == {}
    with pytest.raises(bq.util.ParseError):
        sc.tolerances(["speed=1"])
