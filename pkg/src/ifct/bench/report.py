"""Structured report facts for synthetic cases, and deterministic report-to-path matching."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..attributes import AttributeMap, Quantity, attributes_from_json, attributes_to_json
from ..errors import MissingAttribute, NoConsistentPath, TypeMismatch, UnitMismatch
from ..executor import LesionOutcome, PatientRecord, aggregate_recommendations, evaluate_predicate
from ..guideline import DecisionPath, GuidelineTree, enumerate_paths
from .phantom import Oracle, SyntheticSpec, case_attributes, patient_facts


@dataclass
class LesionFacts:
    lesion_id: int
    attributes: AttributeMap

    def to_json(self) -> dict:
        return {"lesion_id": self.lesion_id, "attributes": attributes_to_json(self.attributes)}

    @classmethod
    def from_json(cls, obj: dict) -> "LesionFacts":
        return cls(int(obj["lesion_id"]), attributes_from_json(obj["attributes"]))


@dataclass
class ReportFacts:
    organ: str
    lesions: list[LesionFacts]
    case_attrs: AttributeMap
    patient: PatientRecord
    text: str
    patient_text: str
    oracle_path_hint: DecisionPath | None = field(default=None)

    def to_json(self) -> dict:
        out = {"organ": self.organ, "lesions": [l.to_json() for l in self.lesions],
               "case_attrs": attributes_to_json(self.case_attrs), "patient": self.patient.to_json(),
               "text": self.text, "patient_text": self.patient_text}
        if self.oracle_path_hint is not None:
            out["oracle_path_hint"] = self.oracle_path_hint.to_json()
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "ReportFacts":
        hint = obj.get("oracle_path_hint")
        return cls(obj["organ"], [LesionFacts.from_json(l) for l in obj["lesions"]],
                   attributes_from_json(obj.get("case_attrs", {})), PatientRecord.from_json(obj["patient"]),
                   obj["text"], obj["patient_text"], DecisionPath.from_json(hint) if hint else None)


def _fmt(value) -> str:
    if isinstance(value, Quantity):
        digits = 2 if value.unit == "cm" else 1
        return f"{value.value:.{digits}f} {value.unit}"
    if isinstance(value, bool):
        return "yes" if value else "no"
    return str(value)


def render_patient_text(patient: PatientRecord) -> str:
    parts = [f"Patient background: {patient.age_years}-year-old {patient.sex}"]
    parts += [f"{name.replace('_', ' ')}: {_fmt(v)}" for name, v in sorted(patient.flags.items())]
    return "; ".join(parts) + "."


def render_findings_text(organ: str, phase: str, lesions: list[LesionFacts]) -> str:
    head = f"{organ.capitalize()} CT, {phase} phase."
    if not lesions:
        return f"{head} No focal {organ} lesion."
    body = [f"{len(lesions)} focal lesion(s)."]
    for lf in lesions:
        attrs = ", ".join(f"{k.replace('_', ' ')} {_fmt(v)}" for k, v in lf.attributes.items())
        body.append(f"Lesion {lf.lesion_id}: {attrs}.")
    return " ".join([head] + body)


def render_facts(tree: GuidelineTree, spec: SyntheticSpec, oracle: Oracle, with_hint: bool = False) -> ReportFacts:
    lesions = [LesionFacts(o.lesion_id, AttributeMap(o.attributes)) for o in oracle.per_lesion]
    return ReportFacts(
        spec.organ, lesions, case_attributes(tree, len(spec.lesions)), spec.patient,
        render_findings_text(spec.organ, spec.patient.phase, lesions),
        render_patient_text(spec.patient),
        oracle.path if with_hint else None,
    )


def path_consistency(tree: GuidelineTree, path: DecisionPath, attrs) -> int | None:
    """Number of steps the stated facts confirm, or None if any stated fact contradicts a step.

    Steps on unstated attributes are neither confirmed nor rejected.
    """
    confirmed = 0
    for nid, label in path.steps:
        try:
            got = evaluate_predicate(tree.nodes[nid].predicate, attrs, nid)
        except MissingAttribute:
            continue
        except (TypeMismatch, UnitMismatch):
            return None
        if got != label:
            return None
        confirmed += 1
    return confirmed


def match_attrs_to_path(tree: GuidelineTree, attrs, paths: list[DecisionPath] | None = None) -> DecisionPath:
    """First fully consistent path in enumeration order."""
    for path in paths if paths is not None else enumerate_paths(tree):
        if path_consistency(tree, path, attrs) is not None:
            return path
    raise NoConsistentPath(f"no path of the {tree.organ} tree agrees with the stated facts")


def match_report_per_lesion(tree: GuidelineTree, facts: ReportFacts) -> list[LesionOutcome]:
    paths = enumerate_paths(tree)
    shared = facts.case_attrs.merged(patient_facts(tree, facts.patient))
    out = []
    for lf in facts.lesions:
        path = match_attrs_to_path(tree, lf.attributes.merged(shared), paths)
        leaf = tree.nodes[path.leaf_id]
        out.append(LesionOutcome(lf.lesion_id, lf.attributes, path, leaf.recommendation, leaf.severity))
    return out


def match_report_to_path(tree: GuidelineTree, facts: ReportFacts) -> DecisionPath:
    """Patient-level path implied by the report: per-lesion matches aggregated by severity.

    With no lesions the case-level facts alone select the path (normally the no-lesion leaf).
    """
    per_lesion = match_report_per_lesion(tree, facts)
    if per_lesion:
        return aggregate_recommendations(per_lesion, tree).path
    shared = facts.case_attrs.merged(patient_facts(tree, facts.patient))
    return match_attrs_to_path(tree, shared)
