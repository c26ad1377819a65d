"""Guideline document format (JSON): schema, parsing and canonical serialization."""

from __future__ import annotations

import json
from typing import Any

import jsonschema

from ..errors import GraphError, PredicateError, SchemaError
from .model import (
    And, AttributeDecl, CategoryOf, Compare, Decision, GuidelineTree, InRange, Leaf, Not, Or,
    PatientRule, Predicate,
)
from .validate import GRAPH_RULES, PREDICATE_RULES, validate_tree

PREDICATE_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["op"],
    "properties": {"op": {"enum": ["le", "lt", "gt", "ge", "eq", "in_range", "category_of",
                                   "and", "or", "not"]}},
}

DOCUMENT_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["organ", "version", "attributes", "root", "nodes"],
    "properties": {
        "organ": {"type": "string", "minLength": 1},
        "version": {"type": "string"},
        "title": {"type": "string"},
        "no_lesion_leaf": {"type": ["string", "null"]},
        "attributes": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "type", "producer"],
                "properties": {
                    "name": {"type": "string", "minLength": 1},
                    "type": {"enum": ["real", "category", "boolean"]},
                    "producer": {"enum": ["measure", "classify", "patient", "segment"]},
                    "unit": {"type": "string"},
                    "function": {"type": "string"},
                    "method": {"type": "string"},
                    "categories": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                },
                "additionalProperties": False,
            },
        },
        "risk_rules": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["output", "cases", "default"],
                "properties": {
                    "output": {"type": "string", "minLength": 1},
                    "cases": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["when", "category"],
                            "properties": {"when": PREDICATE_SCHEMA, "category": {"type": "string"}},
                            "additionalProperties": False,
                        },
                    },
                    "default": {"type": "string"},
                },
                "additionalProperties": False,
            },
        },
        "root": {"type": "string"},
        "nodes": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["kind"],
                "properties": {"kind": {"enum": ["decision", "leaf"]}},
                # if/then keeps error paths pointing at the offending field
                "if": {"properties": {"kind": {"const": "decision"}}},
                "then": {
                    "properties": {
                        "kind": {},
                        "predicate": PREDICATE_SCHEMA,
                        "branches": {"type": "object", "additionalProperties": {"type": "string"}},
                        "text": {"type": "string"},
                    },
                    "required": ["predicate", "branches"],
                    "additionalProperties": False,
                },
                "else": {
                    "properties": {
                        "kind": {},
                        "recommendation": {"type": "string"},
                        "severity": {"type": "integer", "minimum": 0},
                        "text": {"type": "string"},
                    },
                    "required": ["recommendation", "severity"],
                    "additionalProperties": False,
                },
            },
        },
    },
    "additionalProperties": False,
}

_VALIDATOR = jsonschema.Draft202012Validator(DOCUMENT_SCHEMA)
_REAL = (int, float)


# --- predicates -------------------------------------------------------------

def predicate_from_json(obj: Any) -> Predicate:
    if not isinstance(obj, dict) or "op" not in obj:
        raise PredicateError(f"predicate must be an object with an 'op': {obj!r}")
    op = obj["op"]
    try:
        if op in ("and", "or"):
            args = obj["args"]
            if not isinstance(args, list) or len(args) < 2:
                raise PredicateError(f"{op} needs a list of at least 2 args")
            parsed = tuple(predicate_from_json(a) for a in args)
            return And(parsed) if op == "and" else Or(parsed)
        if op == "not":
            return Not(predicate_from_json(obj["arg"]))
        attr = obj["attr"]
        if not isinstance(attr, str) or not attr:
            raise PredicateError(f"attribute name must be a nonempty string: {attr!r}")
        if op == "category_of":
            return CategoryOf(attr)
        unit = obj.get("unit")
        if unit is not None and not isinstance(unit, str):
            raise PredicateError(f"unit must be a string: {unit!r}")
        if op == "in_range":
            lo, hi = obj["lo"], obj["hi"]
            if not all(isinstance(v, _REAL) and not isinstance(v, bool) for v in (lo, hi)):
                raise PredicateError("in_range bounds must be numbers")
            if not lo < hi:
                raise PredicateError(f"in_range needs lo < hi, got [{lo}, {hi}]")
            return InRange(attr, float(lo), float(hi), unit, obj.get("closed", "right"))
        if op in ("le", "lt", "gt", "ge", "eq"):
            value = obj["value"]
            if isinstance(value, bool) or isinstance(value, str):
                if op != "eq":
                    raise PredicateError(f"{op} needs a numeric value")
                return Compare(attr, op, value, unit)
            if not isinstance(value, _REAL):
                raise PredicateError(f"comparison value must be number, string or boolean: {value!r}")
            return Compare(attr, op, float(value), unit)
    except KeyError as exc:
        raise PredicateError(f"{op} predicate missing field {exc.args[0]!r}") from None
    raise PredicateError(f"unknown predicate op {op!r}")


def predicate_to_json(pred: Predicate) -> dict:
    if isinstance(pred, (And, Or)):
        return {"op": "and" if isinstance(pred, And) else "or",
                "args": [predicate_to_json(a) for a in pred.args]}
    if isinstance(pred, Not):
        return {"op": "not", "arg": predicate_to_json(pred.arg)}
    if isinstance(pred, CategoryOf):
        return {"op": "category_of", "attr": pred.attr}
    if isinstance(pred, InRange):
        out = {"op": "in_range", "attr": pred.attr, "lo": pred.lo, "hi": pred.hi}
        if pred.unit is not None:
            out["unit"] = pred.unit
        if pred.closed != "right":
            out["closed"] = pred.closed
        return out
    out = {"op": pred.op, "attr": pred.attr, "value": pred.value}
    if pred.unit is not None:
        out["unit"] = pred.unit
    return out


# --- documents --------------------------------------------------------------

def _load(document) -> dict:
    if isinstance(document, dict):
        return document
    if isinstance(document, bytes):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SchemaError(f"document is not UTF-8: {exc}") from None
    try:
        obj = json.loads(document)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"document is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise SchemaError("document must be a JSON object")
    return obj


def _schema_errors(obj: dict) -> None:
    errors = sorted(_VALIDATOR.iter_errors(obj), key=lambda e: list(e.absolute_path))
    if not errors:
        return
    first = errors[0]
    where = "/".join(str(p) for p in first.absolute_path) or "<root>"
    message = f"{where}: {first.message}"
    if any(p in ("predicate", "when") for p in first.absolute_path):
        raise PredicateError(message)
    raise SchemaError(message)


def load_document(document) -> dict:
    """Decode a document and check it against the JSON schema (shape only)."""
    obj = _load(document)
    _schema_errors(obj)
    return obj


def tree_from_document(obj: dict) -> GuidelineTree:
    """Build a tree from a schema-checked document without semantic validation."""
    attributes = [
        AttributeDecl(
            name=a["name"], type=a["type"], producer=a["producer"], unit=a.get("unit"),
            function=a.get("function"), method=a.get("method"),
            categories=tuple(a["categories"]) if "categories" in a else None,
        )
        for a in obj["attributes"]
    ]
    rules = [
        PatientRule(r["output"], tuple((predicate_from_json(c["when"]), c["category"]) for c in r["cases"]),
                    r["default"])
        for r in obj.get("risk_rules", [])
    ]
    nodes: dict = {}
    for nid, n in obj["nodes"].items():
        if n["kind"] == "decision":
            nodes[nid] = Decision(nid, predicate_from_json(n["predicate"]), dict(n["branches"]), n.get("text", ""))
        else:
            nodes[nid] = Leaf(nid, n["recommendation"], n["severity"], n.get("text", ""))
    return GuidelineTree(
        organ=obj["organ"], version=obj["version"], root_id=obj["root"], nodes=nodes,
        attributes=attributes, risk_rules=rules, title=obj.get("title", ""),
        no_lesion_leaf=obj.get("no_lesion_leaf"),
    )


def parse_guideline(document) -> GuidelineTree:
    """Parse and validate a guideline document given as JSON text, bytes or a decoded dict.

    Raises SchemaError, GraphError or PredicateError describing the first class of problem.
    """
    tree = tree_from_document(load_document(document))
    issues = validate_tree(tree)
    if issues:
        graph = [i for i in issues if i.rule in GRAPH_RULES]
        pred = [i for i in issues if i.rule in PREDICATE_RULES]
        if graph:
            raise GraphError("; ".join(map(str, graph)))
        if pred:
            raise PredicateError("; ".join(map(str, pred)))
        raise SchemaError("; ".join(map(str, issues)))
    return tree


def tree_to_document(tree: GuidelineTree) -> dict:
    attrs = []
    for a in tree.attributes:
        entry: dict[str, Any] = {"name": a.name, "type": a.type, "producer": a.producer}
        for key in ("unit", "function", "method"):
            if getattr(a, key) is not None:
                entry[key] = getattr(a, key)
        if a.categories is not None:
            entry["categories"] = list(a.categories)
        attrs.append(entry)
    nodes: dict[str, Any] = {}
    for nid, n in tree.nodes.items():
        if isinstance(n, Decision):
            nodes[nid] = {"kind": "decision", "predicate": predicate_to_json(n.predicate),
                          "branches": dict(n.branches), "text": n.text}
        else:
            nodes[nid] = {"kind": "leaf", "recommendation": n.recommendation,
                          "severity": n.severity, "text": n.text}
    doc: dict[str, Any] = {"organ": tree.organ, "version": tree.version}
    if tree.title:
        doc["title"] = tree.title
    doc["attributes"] = attrs
    doc["risk_rules"] = [
        {"output": r.output_attr,
         "cases": [{"when": predicate_to_json(p), "category": c} for p, c in r.cases],
         "default": r.default}
        for r in tree.risk_rules
    ]
    doc["root"] = tree.root_id
    if tree.no_lesion_leaf is not None:
        doc["no_lesion_leaf"] = tree.no_lesion_leaf
    doc["nodes"] = nodes
    return doc


def dump_json(obj: Any) -> str:
    """Canonical JSON text used for every file this package writes."""
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def serialize_guideline(tree: GuidelineTree) -> str:
    return dump_json(tree_to_document(tree))


def read_guideline(path) -> GuidelineTree:
    with open(path, "rb") as fh:
        return parse_guideline(fh.read())


def write_guideline(tree: GuidelineTree, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_guideline(tree))
