"""Registry of base functions a plan may call, with their signatures."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..errors import SchemaError

FUNCTION_KINDS = ("segment", "measure", "classify", "patient", "evaluate", "aggregate")


@dataclass(frozen=True)
class FunctionSpec:
    """Signature of one base function.

    ``inputs`` are the pipeline values the function consumes (``scan``, ``patient`` or
    outputs of earlier steps); ``params`` are literal step arguments with a type tag:
    ``real``, ``int``, ``str``, ``list[str]`` or ``enum:a|b|c``.
    """

    name: str
    kind: str
    inputs: tuple[str, ...]
    returns: str
    params: dict[str, str] = field(default_factory=dict)
    unit: str | None = None

    def to_json(self) -> dict:
        out = {"name": self.name, "kind": self.kind, "inputs": list(self.inputs),
               "params": dict(self.params), "returns": self.returns}
        if self.unit is not None:
            out["unit"] = self.unit
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "FunctionSpec":
        try:
            return cls(str(obj["name"]), str(obj["kind"]), tuple(obj["inputs"]), str(obj["returns"]),
                       dict(obj.get("params", {})), obj.get("unit"))
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"bad registry entry {obj!r}: {exc}") from None


class FunctionRegistry:
    def __init__(self, entries=()):
        self.entries: dict[str, FunctionSpec] = {}
        for spec in entries:
            self.add(spec)

    def add(self, spec: FunctionSpec) -> None:
        if spec.name in self.entries:
            raise ValueError(f"function {spec.name!r} registered twice")
        if spec.kind not in FUNCTION_KINDS:
            raise ValueError(f"unknown function kind {spec.kind!r}")
        self.entries[spec.name] = spec

    def get(self, name: str) -> FunctionSpec | None:
        return self.entries.get(name)

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def without(self, *names: str) -> "FunctionRegistry":
        return FunctionRegistry(s for n, s in self.entries.items() if n not in names)

    def to_manifest(self) -> dict:
        return {"functions": [s.to_json() for s in self.entries.values()]}

    @classmethod
    def from_manifest(cls, obj) -> "FunctionRegistry":
        if isinstance(obj, (str, bytes)):
            obj = json.loads(obj)
        if not isinstance(obj, dict) or not isinstance(obj.get("functions"), list):
            raise SchemaError("registry manifest needs a 'functions' list")
        try:
            return cls(FunctionSpec.from_json(f) for f in obj["functions"])
        except ValueError as exc:
            raise SchemaError(str(exc)) from None


_SEG_PARAMS = {"hu_low": "real", "hu_high": "real", "min_component_voxels": "int"}
_DIAM_PARAMS = {"method": "enum:feret|equiv_sphere|bbox"}


def default_registry() -> FunctionRegistry:
    return FunctionRegistry([
        FunctionSpec("segment_organ", "segment", ("scan",), "mask", _SEG_PARAMS),
        FunctionSpec("segment_masses", "segment", ("scan", "organ_mask"), "lesion_set", _SEG_PARAMS),
        FunctionSpec("calc_mass_diameter_cm", "measure", ("scan", "lesions"), "real", _DIAM_PARAMS, "cm"),
        FunctionSpec("diameter_mm", "measure", ("scan", "lesions"), "real", _DIAM_PARAMS, "mm"),
        FunctionSpec("mean_intensity_hu", "measure", ("scan", "lesions"), "real", {}, "HU"),
        FunctionSpec("lesion_volume_mm3", "measure", ("scan", "lesions"), "real", {}, "mm3"),
        FunctionSpec("border_thickness_mm", "measure", ("scan", "lesions"), "real", {}, "mm"),
        FunctionSpec("classify_label", "classify", ("scan", "lesions"), "category", {"labels": "list[str]"}),
        FunctionSpec("assess_patient", "patient", ("patient",), "attribute_map", {"outputs": "list[str]"}),
        FunctionSpec("execute_tree", "evaluate", ("lesions",), "paths"),
        FunctionSpec("aggregate_recommendations", "aggregate", ("paths",), "recommendation"),
    ])


def check_param(type_tag: str, value) -> bool:
    if type_tag == "real":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if type_tag == "int":
        return isinstance(value, int) and not isinstance(value, bool)
    if type_tag == "str":
        return isinstance(value, str)
    if type_tag == "list[str]":
        return isinstance(value, list) and all(isinstance(v, str) for v in value)
    if type_tag.startswith("enum:"):
        return isinstance(value, str) and value in type_tag[5:].split("|")
    return False
