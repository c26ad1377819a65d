"""Plans: ordered, typed steps over registered base functions, and their file format."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace

from ..errors import SchemaError
from ..guideline.document import dump_json

PRIMAL_INPUTS = ("scan", "patient")

# step kind -> (required function kind, function return type, fixed output name or None)
STEP_KINDS: dict[str, tuple[str, str, str | None]] = {
    "segment_organ": ("segment", "mask", "organ_mask"),
    "segment_masses": ("segment", "lesion_set", "lesions"),
    "measure_each": ("measure", "real", None),
    "classify_each": ("classify", "category", None),
    "assess_patient": ("patient", "attribute_map", "patient_attrs"),
    "evaluate_tree": ("evaluate", "paths", "paths"),
    "aggregate": ("aggregate", "recommendation", "recommendation"),
}

# canonical position of each step kind
STEP_RANK = {
    "segment_organ": 0,
    "segment_masses": 1,
    "measure_each": 2,
    "classify_each": 2,
    "assess_patient": 2,
    "evaluate_tree": 3,
    "aggregate": 4,
}


def attr_output(attr: str) -> str:
    return f"attr:{attr}"


@dataclass(frozen=True)
class Step:
    id: str
    kind: str
    function: str
    inputs: tuple[str, ...]
    output: str
    args: dict = field(default_factory=dict)
    attr: str | None = None

    def to_json(self) -> dict:
        out = {"id": self.id, "kind": self.kind, "function": self.function,
               "inputs": list(self.inputs), "output": self.output}
        if self.attr is not None:
            out["attr"] = self.attr
        out["args"] = self.args
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "Step":
        try:
            return cls(id=str(obj["id"]), kind=str(obj["kind"]), function=str(obj["function"]),
                       inputs=tuple(obj["inputs"]), output=str(obj["output"]),
                       args=dict(obj.get("args", {})), attr=obj.get("attr"))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad plan step {obj!r}: {exc}") from None

    def describe(self) -> str:
        return f"{self.id}:{self.kind}({self.attr})" if self.attr else f"{self.id}:{self.kind}"


@dataclass(frozen=True)
class Plan:
    plan_id: str
    tree_ref: dict
    steps: tuple[Step, ...]

    def to_json(self) -> dict:
        return {"plan_id": self.plan_id, "tree_ref": dict(self.tree_ref),
                "steps": [s.to_json() for s in self.steps]}

    @classmethod
    def from_json(cls, obj) -> "Plan":
        if isinstance(obj, (str, bytes)):
            try:
                obj = json.loads(obj)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"plan is not valid JSON: {exc}") from None
        if not isinstance(obj, dict):
            raise SchemaError("plan must be a JSON object")
        try:
            ref = obj["tree_ref"]
            tree_ref = {"organ": str(ref["organ"]), "version": str(ref["version"])}
            steps = obj["steps"]
            if not isinstance(steps, list):
                raise TypeError("steps must be a list")
            return cls(str(obj["plan_id"]), tree_ref, tuple(Step.from_json(s) for s in steps))
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"bad plan: {exc}") from None

    def with_steps(self, steps) -> "Plan":
        return make_plan(self.tree_ref, steps)


def plan_digest(tree_ref: dict, steps) -> str:
    body = json.dumps({"tree_ref": tree_ref, "steps": [s.to_json() for s in steps]},
                      sort_keys=True, separators=(",", ":"))
    return "plan-" + hashlib.sha256(body.encode("utf-8")).hexdigest()[:12]


def make_plan(tree_ref: dict, steps) -> Plan:
    steps = tuple(steps)
    ref = {"organ": tree_ref["organ"], "version": tree_ref["version"]}
    return Plan(plan_digest(ref, steps), ref, steps)


def serialize_plan(plan: Plan) -> str:
    return dump_json(plan.to_json())


def read_plan(path) -> Plan:
    with open(path, "rb") as fh:
        return Plan.from_json(fh.read())


def write_plan(plan: Plan, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_plan(plan))


def renumber(steps) -> list[Step]:
    """Give duplicate step ids fresh ``sN`` ids, keeping the first occurrence."""
    used = {s.id for s in steps}
    seen: set[str] = set()
    out = []
    n = 1
    for s in steps:
        if s.id in seen:
            while f"s{n}" in used:
                n += 1
            s = replace(s, id=f"s{n}")
            used.add(s.id)
        seen.add(s.id)
        out.append(s)
    return out
