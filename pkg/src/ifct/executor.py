"""Plan interpreter: segmentation, per-lesion measurement and labeling, tree walks, aggregation."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .attributes import (
    AttributeMap, Quantity, attributes_from_json, attributes_to_json, value_kind,
)
from .basefn import geometry
from .basefn.labeler import EmbeddingProvider, classify_label, ensure_concurrent_safe, render_subject
from .basefn.segmentation import LesionSet, SegmentationParams, segment_masses, segment_organ
from .errors import (
    GraphError, MissingAttribute, NoLesionLeafUndefined, ProviderError, SchemaError, TypeMismatch,
    UnitMismatch, ValidationFailed,
)
from .guideline import (
    And, CategoryOf, Compare, Decision, DecisionPath, GuidelineTree, InRange, Leaf, Not, Or,
    PatientRule, Predicate, check_path, dump_json, path_text, path_to_leaf,
)
from .planner import FunctionRegistry, Plan, default_registry, validate_plan
from .volume import Mask, Volume

log = logging.getLogger(__name__)

PHASES = ("venous", "arterial", "other")


@dataclass(frozen=True)
class PatientRecord:
    patient_id: str
    age_years: int
    sex: str = "U"
    flags: dict = field(default_factory=dict)
    phase: str = "venous"

    def __post_init__(self):
        if isinstance(self.age_years, bool) or not isinstance(self.age_years, int) or not 0 <= self.age_years <= 150:
            raise ValueError(f"age_years must be an integer in [0, 150], got {self.age_years!r}")
        if self.phase not in PHASES:
            raise ValueError(f"phase must be one of {PHASES}, got {self.phase!r}")
        for name, v in self.flags.items():
            if not isinstance(v, bool):
                raise ValueError(f"flag {name!r} must be boolean")

    def to_json(self) -> dict:
        return {"patient_id": self.patient_id, "age_years": self.age_years, "sex": self.sex,
                "flags": dict(self.flags), "phase": self.phase}

    @classmethod
    def from_json(cls, obj: dict) -> "PatientRecord":
        try:
            return cls(str(obj["patient_id"]), obj["age_years"], str(obj.get("sex", "U")),
                       dict(obj.get("flags", {})), str(obj.get("phase", "venous")))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad patient record: {exc}") from None


def patient_attributes(patient: PatientRecord) -> AttributeMap:
    """Raw patient fields as attributes: age_years, sex, phase and every flag."""
    attrs = AttributeMap()
    attrs["age_years"] = Quantity(float(patient.age_years), "years")
    attrs["sex"] = patient.sex
    attrs["phase"] = patient.phase
    for name, value in patient.flags.items():
        attrs[name] = value
    return attrs


# --- predicates -------------------------------------------------------------

def _lookup(attrs, name: str, node_id):
    try:
        return attrs[name]
    except KeyError:
        raise MissingAttribute(name, node_id) from None


def _real(pred, value, unit: str | None) -> float:
    if not isinstance(value, Quantity):
        raise TypeMismatch(f"{pred.attr!r} is {value_kind(value)}, predicate needs a real")
    if unit is None:
        raise UnitMismatch(f"predicate on {pred.attr!r} has no unit")
    return value.to(unit)


def _truth(pred: Predicate, attrs, node_id) -> bool:
    if isinstance(pred, And):
        return all(_truth(a, attrs, node_id) for a in pred.args)
    if isinstance(pred, Or):
        return any(_truth(a, attrs, node_id) for a in pred.args)
    if isinstance(pred, Not):
        return not _truth(pred.arg, attrs, node_id)
    if isinstance(pred, CategoryOf):
        raise TypeMismatch("category_of does not yield a boolean")
    value = _lookup(attrs, pred.attr, node_id)
    if isinstance(pred, InRange):
        x = _real(pred, value, pred.unit)
        lo_ok = x >= pred.lo if pred.closed in ("left", "both") else x > pred.lo
        hi_ok = x <= pred.hi if pred.closed in ("right", "both") else x < pred.hi
        return lo_ok and hi_ok
    if isinstance(pred.value, bool):
        if not isinstance(value, bool):
            raise TypeMismatch(f"{pred.attr!r} is {value_kind(value)}, predicate needs a boolean")
        return value == pred.value
    if isinstance(pred.value, str):
        if not isinstance(value, str) or isinstance(value, bool):
            raise TypeMismatch(f"{pred.attr!r} is {value_kind(value)}, predicate needs a category")
        return value == pred.value
    x = _real(pred, value, pred.unit)
    v = pred.value
    return {"le": x <= v, "lt": x < v, "gt": x > v, "ge": x >= v, "eq": x == v}[pred.op]


def evaluate_predicate(pred: Predicate, attrs, node_id: str | None = None) -> str:
    """Branch label selected by ``pred``: "true"/"false", or the category for category_of."""
    if isinstance(pred, CategoryOf):
        value = _lookup(attrs, pred.attr, node_id)
        if not isinstance(value, str) or isinstance(value, bool):
            raise TypeMismatch(f"{pred.attr!r} is {value_kind(value)}, category_of needs a category")
        return value
    return "true" if _truth(pred, attrs, node_id) else "false"


def execute_tree(tree: GuidelineTree, attrs) -> DecisionPath:
    steps = []
    nid = tree.root_id
    for _ in range(len(tree.nodes) + 1):
        node = tree.nodes[nid]
        if isinstance(node, Leaf):
            return DecisionPath(tuple(steps), nid, node.recommendation)
        label = evaluate_predicate(node.predicate, attrs, nid)
        if label not in node.branches:
            raise GraphError(f"node {nid!r} has no branch for {label!r}")
        steps.append((nid, label))
        nid = node.branches[label]
    raise GraphError("tree walk did not reach a leaf")


def assess_patient(rules: Sequence[PatientRule], patient: PatientRecord,
                   outputs: Sequence[str] | None = None) -> AttributeMap:
    """First matching case per rule, else its default.

    A case whose condition references an attribute the patient lacks does not match.
    """
    base = patient_attributes(patient)
    out = AttributeMap()
    for rule in rules:
        if outputs is not None and rule.output_attr not in outputs:
            continue
        category = rule.default
        for cond, cat in rule.cases:
            try:
                matched = evaluate_predicate(cond, base) == "true"
            except MissingAttribute:
                matched = False
            if matched:
                category = cat
                break
        out[rule.output_attr] = category
    return out


# --- results ----------------------------------------------------------------

@dataclass
class LesionOutcome:
    lesion_id: int
    attributes: AttributeMap
    path: DecisionPath
    recommendation: str
    severity: int

    def to_json(self, tree: GuidelineTree | None = None) -> dict:
        out = {"lesion_id": self.lesion_id, "attributes": attributes_to_json(self.attributes),
               "path": self.path.to_json(), "recommendation": self.recommendation,
               "severity": self.severity}
        if tree is not None:
            out["trajectory"] = path_text(tree, self.path)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "LesionOutcome":
        return cls(int(obj["lesion_id"]), attributes_from_json(obj["attributes"]),
                   DecisionPath.from_json(obj["path"]), obj["recommendation"], int(obj["severity"]))


@dataclass
class Aggregated:
    recommendation: str
    severity: int
    leaf_id: str
    path: DecisionPath
    source_lesion_id: int | None = None

    def to_json(self, tree: GuidelineTree | None = None) -> dict:
        out = {"recommendation": self.recommendation, "severity": self.severity,
               "leaf_id": self.leaf_id, "source_lesion_id": self.source_lesion_id,
               "path": self.path.to_json()}
        if tree is not None:
            out["trajectory"] = path_text(tree, self.path)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "Aggregated":
        return cls(obj["recommendation"], int(obj["severity"]), obj["leaf_id"],
                   DecisionPath.from_json(obj["path"]), obj.get("source_lesion_id"))


@dataclass
class TraceEvent:
    step_id: str
    kind: str
    inputs: str
    output: str
    wall_time_s: float = 0.0

    def to_json(self, timing: bool = True) -> dict:
        out = {"step_id": self.step_id, "kind": self.kind, "inputs": self.inputs, "output": self.output}
        if timing:
            out["wall_time_s"] = round(self.wall_time_s, 6)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "TraceEvent":
        return cls(obj["step_id"], obj["kind"], obj["inputs"], obj["output"], float(obj.get("wall_time_s", 0.0)))


@dataclass
class CaseResult:
    patient_id: str
    tree_ref: dict
    plan_id: str
    per_lesion: list[LesionOutcome]
    case_attrs: AttributeMap
    patient_attrs: AttributeMap
    aggregated: Aggregated
    trace: list[TraceEvent]

    def to_json(self, tree: GuidelineTree | None = None, timing: bool = True) -> dict:
        return {
            "patient_id": self.patient_id,
            "tree_ref": dict(self.tree_ref),
            "plan_id": self.plan_id,
            "per_lesion": [o.to_json(tree) for o in self.per_lesion],
            "case_attrs": attributes_to_json(self.case_attrs),
            "patient_attrs": attributes_to_json(self.patient_attrs),
            "aggregated": self.aggregated.to_json(tree),
            "trace": [e.to_json(timing) for e in self.trace],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CaseResult":
        try:
            return cls(obj["patient_id"], dict(obj["tree_ref"]), obj["plan_id"],
                       [LesionOutcome.from_json(o) for o in obj["per_lesion"]],
                       attributes_from_json(obj.get("case_attrs", {})),
                       attributes_from_json(obj["patient_attrs"]),
                       Aggregated.from_json(obj["aggregated"]),
                       [TraceEvent.from_json(e) for e in obj["trace"]])
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad case result: {exc}") from None


def serialize_case_result(result: CaseResult, tree: GuidelineTree | None = None, timing: bool = True) -> str:
    return dump_json(result.to_json(tree, timing))


def aggregate_recommendations(per_lesion: Sequence[LesionOutcome], tree: GuidelineTree) -> Aggregated:
    """Highest-severity lesion wins, ties to the lowest lesion id; no lesions -> the no-lesion leaf."""
    if not per_lesion:
        if tree.no_lesion_leaf is None:
            raise NoLesionLeafUndefined(f"tree {tree.organ} {tree.version} declares no no-lesion leaf")
        leaf = tree.nodes[tree.no_lesion_leaf]
        return Aggregated(leaf.recommendation, leaf.severity, leaf.id, path_to_leaf(tree, leaf.id))
    best = min(per_lesion, key=lambda o: (-o.severity, o.lesion_id))
    return Aggregated(best.recommendation, best.severity, best.path.leaf_id, best.path, best.lesion_id)


# --- measurement dispatch ---------------------------------------------------

def _diam(fn):
    return lambda vol, mask, args: fn(mask, args.get("method", "feret"))


MEASURES: dict[str, Callable[[Volume, Mask, dict], float]] = {
    "calc_mass_diameter_cm": _diam(geometry.calc_mass_diameter_cm),
    "diameter_mm": _diam(geometry.diameter_mm),
    "mean_intensity_hu": lambda vol, mask, args: geometry.mean_intensity_hu(vol, mask),
    "lesion_volume_mm3": lambda vol, mask, args: geometry.lesion_volume_mm3(mask),
    "border_thickness_mm": lambda vol, mask, args: geometry.border_thickness_mm(mask),
}

SEGMENT_ATTRIBUTES: dict[str, Callable[[LesionSet], object]] = {
    "lesion_count": lambda lesions: Quantity(float(len(lesions)), "count"),
}


def lesion_subject(organ: str, vol: Volume, mask: Mask) -> str:
    return render_subject(organ, geometry.calc_mass_diameter_cm(mask), geometry.mean_intensity_hu(vol, mask))


def _summ(value) -> str:
    if isinstance(value, Volume):
        return f"volume {'x'.join(map(str, value.dims))}"
    if isinstance(value, Mask):
        return f"mask popcount={value.popcount}"
    if isinstance(value, LesionSet):
        return f"{len(value)} lesion(s)"
    return str(value)


def execute_plan(plan: Plan, tree: GuidelineTree, vol: Volume, patient: PatientRecord,
                 provider: EmbeddingProvider | None = None,
                 registry: FunctionRegistry | None = None) -> CaseResult:
    """Run every plan step in order against one scan and patient.

    A base-function failure aborts the case; the exception carries the trace so far as
    ``partial_trace``.
    """
    registry = registry or default_registry()
    report = validate_plan(plan, tree, registry)
    if not report.ok:
        raise ValidationFailed(report)
    if provider is not None:
        provider = ensure_concurrent_safe(provider)

    trace: list[TraceEvent] = []
    values: dict[str, object] = {"scan": vol, "patient": patient}
    lesions = LesionSet([], tree.organ)
    case_attrs = AttributeMap()
    patient_attrs = AttributeMap()
    per_lesion: list[LesionOutcome] = []
    aggregated: Aggregated | None = None
    segment_decls = [d for d in tree.attributes if d.producer == "segment"]

    for step in plan.steps:
        t0 = time.perf_counter()
        try:
            if step.kind == "segment_organ":
                out = segment_organ(vol, SegmentationParams(**step.args))
            elif step.kind == "segment_masses":
                lesions = segment_masses(vol, values["organ_mask"], SegmentationParams(**step.args), tree.organ)
                for decl in segment_decls:
                    if decl.function == step.function:
                        if decl.name not in SEGMENT_ATTRIBUTES:
                            raise TypeMismatch(f"segmentation cannot produce attribute {decl.name!r}")
                        case_attrs[decl.name] = SEGMENT_ATTRIBUTES[decl.name](lesions)
                out = lesions
            elif step.kind == "measure_each":
                unit = registry.get(step.function).unit
                measure = MEASURES[step.function]
                for lesion in lesions:
                    lesion.attributes[step.attr] = Quantity(measure(vol, lesion.mask, step.args), unit)
                out = f"{step.attr} for {len(lesions)} lesion(s)"
            elif step.kind == "classify_each":
                if provider is None and len(lesions):
                    raise ProviderError(f"step {step.id} needs an embedding provider")
                for lesion in lesions:
                    subject = lesion_subject(tree.organ, vol, lesion.mask)
                    label, _ = classify_label(provider, subject, step.args["labels"])
                    lesion.attributes[step.attr] = label
                out = f"{step.attr} for {len(lesions)} lesion(s)"
            elif step.kind == "assess_patient":
                patient_attrs = patient_attributes(patient)
                patient_attrs.update(assess_patient(tree.risk_rules, patient, step.args["outputs"]))
                out = ", ".join(f"{k}={v}" for k, v in patient_attrs.items())
            elif step.kind == "evaluate_tree":
                per_lesion = []
                for lesion in lesions:
                    attrs = lesion.attributes.merged(case_attrs, patient_attrs)
                    path = execute_tree(tree, attrs)
                    leaf = tree.nodes[path.leaf_id]
                    per_lesion.append(LesionOutcome(lesion.lesion_id, lesion.attributes, path,
                                                    leaf.recommendation, leaf.severity))
                out = "; ".join(f"lesion {o.lesion_id} -> {o.path.leaf_id}" for o in per_lesion) or "no lesions"
            elif step.kind == "aggregate":
                aggregated = aggregate_recommendations(per_lesion, tree)
                out = aggregated.recommendation
            else:
                raise TypeMismatch(f"unknown step kind {step.kind!r}")
        except Exception as exc:
            exc.partial_trace = trace
            raise
        values[step.output] = out
        trace.append(TraceEvent(step.id, step.kind, ", ".join(_summ(values.get(i, i)) for i in step.inputs),
                                _summ(out), time.perf_counter() - t0))

    for outcome in per_lesion:
        check_path(tree, outcome.path)
    return CaseResult(patient.patient_id, tree.ref, plan.plan_id, per_lesion, case_attrs,
                      patient_attrs, aggregated, trace)
