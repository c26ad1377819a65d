"""Structural and semantic checks for guideline trees."""

from __future__ import annotations

from ..attributes import UNITS, units_compatible
from .model import (
    ATTR_TYPES, CLOSEDNESS, COMPARE_OPS, PRODUCERS,
    And, AttributeDecl, CategoryOf, Compare, Decision, GuidelineTree, InRange, Issue, Leaf, Not,
    Or, PatientRule, Predicate,
)

GRAPH_RULES = frozenset({"missing root", "dangling branch", "cycle", "unreachable", "shared node"})
PREDICATE_RULES = frozenset({"predicate"})


def _check_predicate(pred: Predicate, decls: dict[str, AttributeDecl], node: str | None,
                     issues: list[Issue], nested: bool = False) -> None:
    if isinstance(pred, (And, Or)):
        kind = type(pred).__name__
        if len(pred.args) < 2:
            issues.append(Issue(node, "predicate", f"{kind} needs at least 2 children"))
        for a in pred.args:
            _check_predicate(a, decls, node, issues, nested=True)
        return
    if isinstance(pred, Not):
        _check_predicate(pred.arg, decls, node, issues, nested=True)
        return
    if not isinstance(pred, (Compare, InRange, CategoryOf)):
        issues.append(Issue(node, "predicate", f"unknown predicate {pred!r}"))
        return
    if not pred.attr:
        issues.append(Issue(node, "predicate", "empty attribute name"))
        return
    decl = decls.get(pred.attr)
    if decl is None:
        issues.append(Issue(node, "undeclared attribute", pred.attr))
        return
    if isinstance(pred, CategoryOf):
        if nested:
            issues.append(Issue(node, "predicate", "category_of cannot be combined with and/or/not"))
        if decl.type != "category":
            issues.append(Issue(node, "attribute type", f"category_of on {decl.type} attribute {pred.attr!r}"))
        return
    if isinstance(pred, InRange):
        if pred.closed not in CLOSEDNESS:
            issues.append(Issue(node, "predicate", f"bad closedness {pred.closed!r}"))
        if not pred.lo < pred.hi:
            issues.append(Issue(node, "predicate", f"range needs lo < hi, got [{pred.lo}, {pred.hi}]"))
        _check_real(pred.attr, pred.unit, decl, node, issues)
        return
    # Compare
    if pred.op not in COMPARE_OPS:
        issues.append(Issue(node, "predicate", f"unknown op {pred.op!r}"))
        return
    if isinstance(pred.value, bool):
        if decl.type != "boolean":
            issues.append(Issue(node, "attribute type", f"boolean test on {decl.type} attribute {pred.attr!r}"))
        elif pred.op != "eq":
            issues.append(Issue(node, "predicate", "boolean values only support eq"))
    elif isinstance(pred.value, str):
        if decl.type != "category":
            issues.append(Issue(node, "attribute type", f"category test on {decl.type} attribute {pred.attr!r}"))
        elif pred.op != "eq":
            issues.append(Issue(node, "predicate", "category values only support eq"))
        elif decl.categories and pred.value not in decl.categories:
            issues.append(Issue(node, "attribute type", f"{pred.value!r} is not a category of {pred.attr!r}"))
    else:
        _check_real(pred.attr, pred.unit, decl, node, issues)


def _check_real(attr: str, unit: str | None, decl: AttributeDecl, node, issues) -> None:
    if decl.type != "real":
        issues.append(Issue(node, "attribute type", f"numeric test on {decl.type} attribute {attr!r}"))
        return
    if unit is None:
        issues.append(Issue(node, "unit", f"numeric test on {attr!r} has no unit"))
    elif unit not in UNITS:
        issues.append(Issue(node, "unit", f"unknown unit {unit!r}"))
    elif decl.unit in UNITS and not units_compatible(unit, decl.unit):
        issues.append(Issue(node, "unit", f"{unit} is incompatible with {attr!r} in {decl.unit}"))


def _check_manifest(tree: GuidelineTree, issues: list[Issue]) -> dict[str, AttributeDecl]:
    decls: dict[str, AttributeDecl] = {}
    for decl in tree.attributes:
        if decl.name in decls:
            issues.append(Issue(None, "duplicate attribute", decl.name))
            continue
        decls[decl.name] = decl
        if decl.type not in ATTR_TYPES:
            issues.append(Issue(None, "manifest", f"{decl.name}: unknown type {decl.type!r}"))
        if decl.producer not in PRODUCERS:
            issues.append(Issue(None, "manifest", f"{decl.name}: unknown producer {decl.producer!r}"))
        if decl.type == "real" and decl.unit not in UNITS:
            issues.append(Issue(None, "manifest", f"{decl.name}: real attributes need a known unit"))
        if decl.type == "category" and not decl.categories:
            issues.append(Issue(None, "manifest", f"{decl.name}: category attributes need categories"))
        if decl.categories and len(set(decl.categories)) != len(decl.categories):
            issues.append(Issue(None, "manifest", f"{decl.name}: duplicate categories"))
        if decl.producer in ("measure", "classify", "segment") and not decl.function:
            issues.append(Issue(None, "manifest", f"{decl.name}: {decl.producer} attributes need a function"))
        if decl.producer == "classify" and decl.type != "category":
            issues.append(Issue(None, "manifest", f"{decl.name}: classify attributes must be categories"))
    return decls


def _check_rules(rules: list[PatientRule], decls: dict[str, AttributeDecl], issues: list[Issue]) -> None:
    for rule in rules:
        decl = decls.get(rule.output_attr)
        where = f"risk rule {rule.output_attr!r}"
        if decl is None:
            issues.append(Issue(None, "undeclared attribute", f"{where} output"))
            continue
        if decl.producer != "patient" or decl.type != "category":
            issues.append(Issue(None, "risk rule", f"{where} must output a patient category"))
            continue
        outputs = [cat for _, cat in rule.cases] + [rule.default]
        for cat in outputs:
            if decl.categories and cat not in decl.categories:
                issues.append(Issue(None, "risk rule", f"{where} yields undeclared category {cat!r}"))
        for cond, _ in rule.cases:
            _check_predicate(cond, decls, None, issues, nested=True)


def _check_graph(tree: GuidelineTree, issues: list[Issue]) -> None:
    nodes = tree.nodes
    if tree.root_id not in nodes:
        issues.append(Issue(tree.root_id, "missing root", "root id is not a node"))
        return
    parents: dict[str, list[str]] = {nid: [] for nid in nodes}
    for node in nodes.values():
        if isinstance(node, Decision):
            for label, child in node.branches.items():
                if child not in nodes:
                    issues.append(Issue(node.id, "dangling branch", f"branch {label!r} -> missing id {child!r}"))
                else:
                    parents[child].append(node.id)

    # iterative DFS with colours for cycle detection
    state: dict[str, int] = {}
    stack = [(tree.root_id, iter(_children(nodes[tree.root_id], nodes)))]
    state[tree.root_id] = 1
    cycle_reported = False
    while stack:
        nid, it = stack[-1]
        child = next(it, None)
        if child is None:
            state[nid] = 2
            stack.pop()
            continue
        s = state.get(child, 0)
        if s == 1:
            if not cycle_reported:
                issues.append(Issue(child, "cycle", f"edge {nid} -> {child} closes a cycle"))
                cycle_reported = True
        elif s == 0:
            state[child] = 1
            stack.append((child, iter(_children(nodes[child], nodes))))

    for nid in nodes:
        if nid not in state:
            issues.append(Issue(nid, "unreachable", "not reachable from root"))
    for nid, ps in parents.items():
        if nid == tree.root_id:
            continue
        if len(ps) > 1:
            issues.append(Issue(nid, "shared node", f"referenced by {len(ps)} branches ({', '.join(ps)})"))


def _children(node, nodes) -> list[str]:
    if isinstance(node, Decision):
        return [c for c in node.branches.values() if c in nodes]
    return []


def _check_nodes(tree: GuidelineTree, decls: dict[str, AttributeDecl], issues: list[Issue]) -> None:
    for nid, node in tree.nodes.items():
        if node.id != nid:
            issues.append(Issue(nid, "node id", f"node keyed {nid!r} carries id {node.id!r}"))
        if isinstance(node, Leaf):
            if not node.recommendation:
                issues.append(Issue(nid, "leaf recommendation", "leaf has no recommendation"))
            if isinstance(node.severity, bool) or not isinstance(node.severity, int) or node.severity < 0:
                issues.append(Issue(nid, "leaf severity", f"severity must be an integer >= 0, got {node.severity!r}"))
            continue
        if not isinstance(node, Decision):
            issues.append(Issue(nid, "node kind", f"unknown node {node!r}"))
            continue
        if len(node.branches) < 2:
            issues.append(Issue(nid, "fewer than 2 branches"))
        n_before = len(issues)
        _check_predicate(node.predicate, decls, nid, issues)
        if len(issues) > n_before:
            continue
        labels = set(node.branches)
        if isinstance(node.predicate, CategoryOf):
            cats = set(decls[node.predicate.attr].categories or ())
            if labels != cats:
                issues.append(Issue(nid, "category coverage",
                                    f"branches {sorted(labels)} must equal categories {sorted(cats)}"))
        elif labels != {"true", "false"}:
            issues.append(Issue(nid, "branch labels", f"boolean predicate needs branches true/false, got {sorted(labels)}"))


def validate_tree(tree: GuidelineTree) -> list[Issue]:
    """Every violated tree invariant as an Issue; empty when the tree is valid."""
    issues: list[Issue] = []
    decls = _check_manifest(tree, issues)
    _check_rules(tree.risk_rules, decls, issues)
    _check_graph(tree, issues)
    _check_nodes(tree, decls, issues)
    if tree.no_lesion_leaf is not None and not isinstance(tree.nodes.get(tree.no_lesion_leaf), Leaf):
        issues.append(Issue(tree.no_lesion_leaf, "no-lesion leaf", "no_lesion_leaf must name a leaf"))
    return issues
