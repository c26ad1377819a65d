"""Typed attribute values: quantities with units, categories and booleans."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

from .errors import TypeMismatch, UnitMismatch

# unit -> (dimension, factor to the dimension's base unit)
UNITS: dict[str, tuple[str, float]] = {
    "mm": ("length", 1.0),
    "cm": ("length", 10.0),
    "HU": ("intensity", 1.0),
    "mm3": ("volume", 1.0),
    "count": ("count", 1.0),
    "years": ("age", 1.0),
}


def unit_dimension(unit: str) -> str:
    try:
        return UNITS[unit][0]
    except KeyError:
        raise UnitMismatch(f"unknown unit {unit!r}") from None


def units_compatible(a: str, b: str) -> bool:
    return unit_dimension(a) == unit_dimension(b)


def convert(value: float, from_unit: str, to_unit: str) -> float:
    if from_unit == to_unit:
        return value
    if not units_compatible(from_unit, to_unit):
        raise UnitMismatch(f"cannot convert {from_unit} to {to_unit}")
    return value * UNITS[from_unit][1] / UNITS[to_unit][1]


@dataclass(frozen=True)
class Quantity:
    value: float
    unit: str

    def __post_init__(self):
        unit_dimension(self.unit)
        if not math.isfinite(self.value):
            raise ValueError(f"non-finite quantity {self.value}")

    def to(self, unit: str) -> float:
        return convert(self.value, self.unit, unit)

    def __str__(self) -> str:
        return f"{self.value:g} {self.unit}"


Value = Union[Quantity, str, bool]


def value_kind(value: Value) -> str:
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, Quantity):
        return "real"
    if isinstance(value, str):
        return "category"
    raise TypeMismatch(f"unsupported attribute value {value!r}")


class AttributeMap(dict):
    """Name -> value mapping where every name is bound at most once."""

    def __setitem__(self, name: str, value: Value) -> None:
        if name in self:
            raise KeyError(f"attribute {name!r} already bound")
        value_kind(value)
        super().__setitem__(name, value)

    def update(self, other=(), **kw):  # route through __setitem__
        for k, v in dict(other, **kw).items():
            self[k] = v

    def merged(self, *others: "AttributeMap") -> "AttributeMap":
        out = AttributeMap(self)
        for other in others:
            out.update(other)
        return out


def value_to_json(value: Value):
    if isinstance(value, Quantity):
        return {"value": value.value, "unit": value.unit}
    return value


def value_from_json(obj) -> Value:
    if isinstance(obj, dict):
        return Quantity(float(obj["value"]), str(obj["unit"]))
    if isinstance(obj, (bool, str)):
        return obj
    raise TypeMismatch(f"cannot decode attribute value {obj!r}")


def attributes_to_json(attrs: AttributeMap) -> dict:
    return {k: value_to_json(v) for k, v in attrs.items()}


def attributes_from_json(obj: dict) -> AttributeMap:
    out = AttributeMap()
    for k, v in obj.items():
        out[k] = value_from_json(v)
    return out
