import pytest
from hypothesis import given, strategies as st

from ifct.attributes import (
    AttributeMap, Quantity, attributes_from_json, attributes_to_json, convert, units_compatible, value_kind,
)
from ifct.errors import TypeMismatch, UnitMismatch


def test_cm_mm_conversion():
    assert Quantity(1.5, "cm").to("mm") == 15.0
    assert convert(15.0, "mm", "cm") == 1.5
    assert units_compatible("mm", "cm")
    assert not units_compatible("mm", "HU")


def test_cross_dimension_is_rejected():
    with pytest.raises(UnitMismatch):
        Quantity(3.0, "HU").to("mm")
    with pytest.raises(UnitMismatch):
        Quantity(1.0, "furlong")


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        Quantity(float("nan"), "mm")


def test_single_binding():
    m = AttributeMap(a=True)
    m["b"] = "x"
    with pytest.raises(KeyError):
        m["b"] = "y"
    with pytest.raises(KeyError):
        m.merged(AttributeMap(a=False))


def test_kinds():
    assert value_kind(True) == "boolean"
    assert value_kind("Low") == "category"
    assert value_kind(Quantity(1, "mm")) == "real"
    with pytest.raises(TypeMismatch):
        value_kind(3)


@given(st.dictionaries(st.from_regex(r"[a-z_]{1,8}", fullmatch=True),
                       st.one_of(st.booleans(), st.text(max_size=5),
                                 st.builds(Quantity, st.floats(-1e6, 1e6), st.sampled_from(["mm", "cm", "HU"])))))
def test_json_round_trip(d):
    m = AttributeMap(d)
    assert attributes_from_json(attributes_to_json(m)) == m


@given(st.floats(-1e4, 1e4))
def test_round_trip_conversion(x):
    assert convert(convert(x, "cm", "mm"), "mm", "cm") == pytest.approx(x, rel=1e-12, abs=1e-12)
