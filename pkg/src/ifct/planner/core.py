"""Draft synthesis, the STOP-criterion validator, rule-based repair and the refinement loop."""

from __future__ import annotations

import json
import logging
import urllib.error
import urllib.request
from dataclasses import dataclass, field, replace
from typing import Callable, Protocol

from ..attributes import UNITS, units_compatible
from ..basefn.segmentation import SegmentationParams, organ_windows
from ..errors import (
    MaxIterationsExceeded, ProviderError, SchemaError, Unrepairable, UnresolvableProducer,
    ValidationFailed,
)
from ..guideline import GuidelineTree, iter_atoms, tree_to_document
from ..guideline.model import Decision
from .plan import (
    PRIMAL_INPUTS, STEP_KINDS, STEP_RANK, Plan, Step, attr_output, make_plan, renumber,
)
from .registry import FunctionRegistry, check_param

log = logging.getLogger(__name__)

DEFAULT_MAX_ITER = 3

SYNTACTIC = "syntactic"
SEMANTIC = "semantic"

# rules refine_plan knows how to fix
REPAIRABLE = frozenset({
    "duplicate step id", "arity", "missing input", "ordering", "missing step",
    "missing aggregate", "duplicate aggregate", "missing evaluate", "duplicate evaluate",
    "attribute never produced", "duplicate producer", "producer mismatch", "tree ref",
})


@dataclass(frozen=True)
class PlanIssue:
    category: str
    rule: str
    message: str = ""
    step: str | None = None
    attr: str | None = None

    def __str__(self) -> str:
        bits = [f"{self.category}/{self.rule}"]
        if self.step:
            bits.append(f"step={self.step}")
        if self.attr:
            bits.append(f"attr={self.attr}")
        if self.message:
            bits.append(self.message)
        return " ".join(bits)

    def to_json(self) -> dict:
        return {"category": self.category, "rule": self.rule, "message": self.message,
                "step": self.step, "attr": self.attr}


@dataclass
class ValidationReport:
    issues: list[PlanIssue] = field(default_factory=list)

    @property
    def syntactic_ok(self) -> bool:
        return not any(i.category == SYNTACTIC for i in self.issues)

    @property
    def semantic_ok(self) -> bool:
        return not any(i.category == SEMANTIC for i in self.issues)

    @property
    def ok(self) -> bool:
        return not self.issues

    def rules(self) -> set[str]:
        return {i.rule for i in self.issues}

    def summary(self) -> str:
        if self.ok:
            return "ok"
        return "; ".join(str(i) for i in self.issues)

    def to_json(self) -> dict:
        return {"syntactic_ok": self.syntactic_ok, "semantic_ok": self.semantic_ok,
                "issues": [i.to_json() for i in self.issues]}


# --- synthesis --------------------------------------------------------------

def _producer_function(tree: GuidelineTree, registry: FunctionRegistry, decl) -> str:
    expected = {"measure": "measure", "classify": "classify", "segment": "segment"}[decl.producer]
    spec = registry.get(decl.function) if decl.function else None
    if spec is None or spec.kind != expected:
        raise UnresolvableProducer(decl.name, decl.function)
    return spec.name


def producer_step(decl, registry: FunctionRegistry, step_id: str,
                  method_override: str | None = None) -> Step:
    """Canonical MeasureEach/ClassifyEach step for one manifest attribute."""
    spec = registry.get(decl.function) if decl.function else None
    if spec is None:
        raise UnresolvableProducer(decl.name, decl.function)
    args: dict = {}
    if decl.producer == "measure":
        if "method" in spec.params:
            args["method"] = method_override or decl.method or "feret"
        kind = "measure_each"
    else:
        args["labels"] = list(decl.categories or ())
        kind = "classify_each"
    return Step(step_id, kind, spec.name, spec.inputs, attr_output(decl.name), args, decl.name)


def _segment_step(kind: str, function: str, registry, params: SegmentationParams, step_id: str) -> Step:
    spec = registry.get(function)
    if spec is None:
        raise UnresolvableProducer(kind, function)
    return Step(step_id, kind, function, spec.inputs, STEP_KINDS[kind][2], params.as_dict())


def _fixed_step(kind: str, function: str, registry, step_id: str, args=None) -> Step:
    spec = registry.get(function)
    if spec is None:
        raise UnresolvableProducer(kind, function)
    return Step(step_id, kind, function, spec.inputs, STEP_KINDS[kind][2], dict(args or {}))


def _canonical_steps(tree: GuidelineTree, registry: FunctionRegistry,
                     segmentation: dict[str, SegmentationParams] | None = None,
                     method_override: str | None = None) -> list[Step]:
    windows = segmentation or organ_windows(tree.organ)
    steps: list[Step] = []

    def sid() -> str:
        return f"s{len(steps) + 1}"

    for decl in tree.attributes:
        if decl.producer == "segment":
            _producer_function(tree, registry, decl)
    steps.append(_segment_step("segment_organ", "segment_organ", registry, windows["organ"], sid()))
    steps.append(_segment_step("segment_masses", "segment_masses", registry, windows["mass"], sid()))
    for decl in tree.attributes:
        if decl.producer in ("measure", "classify"):
            _producer_function(tree, registry, decl)
            steps.append(producer_step(decl, registry, sid(), method_override))
    if any(d.producer == "patient" for d in tree.attributes):
        outputs = [r.output_attr for r in tree.risk_rules]
        steps.append(_fixed_step("assess_patient", "assess_patient", registry, sid(), {"outputs": outputs}))
    steps.append(_fixed_step("evaluate_tree", "execute_tree", registry, sid()))
    steps.append(_fixed_step("aggregate", "aggregate_recommendations", registry, sid()))
    return steps


def synthesize_plan(tree: GuidelineTree, registry: FunctionRegistry,
                    segmentation: dict[str, SegmentationParams] | None = None,
                    method_override: str | None = None) -> Plan:
    """Deterministic draft: segmentation, one producer per manifest attribute, patient
    assessment when needed, then tree evaluation and aggregation."""
    return make_plan(tree.ref, _canonical_steps(tree, registry, segmentation, method_override))


# --- validation -------------------------------------------------------------

def _referenced_attrs(tree: GuidelineTree) -> list[str]:
    names: dict[str, None] = {}
    for node in tree.nodes.values():
        if isinstance(node, Decision):
            for atom in iter_atoms(node.predicate):
                names.setdefault(atom.attr, None)
    for rule in tree.risk_rules:
        for cond, _ in rule.cases:
            for atom in iter_atoms(cond):
                names.setdefault(atom.attr, None)
    return list(names)


def _check_syntax(plan: Plan, registry: FunctionRegistry, issues: list[PlanIssue]) -> None:
    seen_ids: set[str] = set()
    available = set(PRIMAL_INPUTS)
    max_rank = -1
    counts: dict[str, int] = {}
    for step in plan.steps:
        counts[step.kind] = counts.get(step.kind, 0) + 1
        if step.id in seen_ids:
            issues.append(PlanIssue(SYNTACTIC, "duplicate step id", step.id, step.id))
        seen_ids.add(step.id)
        if step.kind not in STEP_KINDS:
            issues.append(PlanIssue(SYNTACTIC, "unknown kind", f"{step.kind!r}", step.id))
            continue
        fkind, returns, output = STEP_KINDS[step.kind]
        spec = registry.get(step.function)
        if spec is None:
            issues.append(PlanIssue(SYNTACTIC, "unknown function", f"{step.function!r} is not registered", step.id))
        elif spec.kind != fkind or spec.returns != returns:
            issues.append(PlanIssue(SYNTACTIC, "kind mismatch",
                                    f"{step.function} is a {spec.kind} function returning {spec.returns}", step.id))
        else:
            if tuple(step.inputs) != spec.inputs:
                issues.append(PlanIssue(SYNTACTIC, "arity",
                                        f"inputs {list(step.inputs)} != {list(spec.inputs)}", step.id))
            if set(step.args) != set(spec.params) or not all(
                    check_param(spec.params[k], v) for k, v in step.args.items()):
                issues.append(PlanIssue(SYNTACTIC, "bad args",
                                        f"args {step.args} do not match {spec.params}", step.id))
        if step.kind in ("measure_each", "classify_each"):
            if not step.attr or step.output != attr_output(step.attr):
                issues.append(PlanIssue(SYNTACTIC, "bad args", "producer step needs attr and matching output",
                                        step.id, step.attr))
        elif step.output != output:
            issues.append(PlanIssue(SYNTACTIC, "bad args", f"output must be {output!r}", step.id))
        for name in step.inputs:
            if name not in available:
                issues.append(PlanIssue(SYNTACTIC, "missing input", f"{name!r} not produced before use", step.id))
        available.add(step.output)
        rank = STEP_RANK[step.kind]
        if rank < max_rank:
            issues.append(PlanIssue(SYNTACTIC, "ordering", f"{step.kind} after a later-stage step", step.id))
        max_rank = max(max_rank, rank)
    for kind, missing_rule, dup_rule in (("aggregate", "missing aggregate", "duplicate aggregate"),
                                         ("evaluate_tree", "missing evaluate", "duplicate evaluate")):
        n = counts.get(kind, 0)
        if n == 0:
            issues.append(PlanIssue(SYNTACTIC, missing_rule, f"plan has no {kind} step"))
        elif n > 1:
            issues.append(PlanIssue(SYNTACTIC, dup_rule, f"plan has {n} {kind} steps"))
    for kind in ("segment_organ", "segment_masses"):
        if counts.get(kind, 0) != 1:
            issues.append(PlanIssue(SYNTACTIC, "missing step" if not counts.get(kind) else "duplicate producer",
                                    f"plan needs exactly one {kind} step"))


def _check_semantics(plan: Plan, tree: GuidelineTree, registry: FunctionRegistry,
                     issues: list[PlanIssue]) -> None:
    if plan.tree_ref.get("organ") != tree.organ or plan.tree_ref.get("version") != tree.version:
        issues.append(PlanIssue(SEMANTIC, "tree ref", f"plan targets {plan.tree_ref}, tree is {tree.ref}"))
    decls = {d.name: d for d in tree.attributes}
    for decl in tree.attributes:
        if decl.producer in ("measure", "classify", "segment"):
            try:
                _producer_function(tree, registry, decl)
            except UnresolvableProducer as exc:
                issues.append(PlanIssue(SEMANTIC, "unresolvable producer", str(exc), None, decl.name))

    eval_idx = next((i for i, s in enumerate(plan.steps) if s.kind == "evaluate_tree"), len(plan.steps))
    before = plan.steps[:eval_idx]
    produced: dict[str, str] = {}
    for step in plan.steps:
        if step.kind not in ("measure_each", "classify_each") or not step.attr:
            continue
        decl = decls.get(step.attr)
        if decl is None:
            issues.append(PlanIssue(SEMANTIC, "unknown attribute", "step produces an undeclared attribute",
                                    step.id, step.attr))
            continue
        if step.attr in produced:
            issues.append(PlanIssue(SEMANTIC, "duplicate producer", f"already produced by {produced[step.attr]}",
                                    step.id, step.attr))
            continue
        produced[step.attr] = step.id
        wanted = "measure_each" if decl.producer == "measure" else "classify_each"
        spec = registry.get(step.function)
        if step.kind != wanted or step.function != decl.function:
            issues.append(PlanIssue(SEMANTIC, "producer mismatch",
                                    f"manifest wants {wanted} via {decl.function}", step.id, step.attr))
        elif step.kind == "classify_each" and step.args.get("labels") != list(decl.categories or ()):
            issues.append(PlanIssue(SEMANTIC, "producer mismatch", "labels differ from declared categories",
                                    step.id, step.attr))
        elif (step.kind == "measure_each" and spec is not None and spec.unit in UNITS
              and decl.unit in UNITS and not units_compatible(spec.unit, decl.unit)):
            issues.append(PlanIssue(SEMANTIC, "producer mismatch",
                                    f"{step.function} yields {spec.unit}, attribute is {decl.unit}",
                                    step.id, step.attr))

    assess = [s for s in before if s.kind == "assess_patient"]
    assessed_outputs = set(assess[0].args.get("outputs", [])) if assess else set()
    rule_outputs = {r.output_attr for r in tree.risk_rules}
    for name in _referenced_attrs(tree):
        decl = decls.get(name)
        if decl is None:
            issues.append(PlanIssue(SEMANTIC, "unknown attribute", "referenced but undeclared", None, name))
            continue
        if decl.producer == "segment":
            ok = any(s.kind == "segment_masses" and s.function == decl.function for s in before)
        elif decl.producer == "patient":
            ok = bool(assess) and (name not in rule_outputs or name in assessed_outputs)
        else:
            ok = any(s.attr == name and s.kind in ("measure_each", "classify_each") for s in before)
        if not ok:
            issues.append(PlanIssue(SEMANTIC, "attribute never produced",
                                    "tested by the tree but not produced before evaluate_tree", None, name))


def validate_plan(plan: Plan, tree: GuidelineTree, registry: FunctionRegistry) -> ValidationReport:
    """The STOP criterion: syntactic well-formedness plus attribute coverage of the tree."""
    issues: list[PlanIssue] = []
    _check_syntax(plan, registry, issues)
    _check_semantics(plan, tree, registry, issues)
    return ValidationReport(issues)


# --- repair -----------------------------------------------------------------

def refine_plan(plan: Plan, report: ValidationReport, tree: GuidelineTree,
                registry: FunctionRegistry) -> Plan:
    """Apply deterministic repairs for every issue in ``report``.

    Missing producers are inserted from the manifest, out-of-order steps are moved to their
    canonical stage, and surplus aggregate/evaluate/producer steps are dropped.
    """
    if report.ok:
        raise ValueError("refine_plan needs a report with at least one issue")
    for issue in report.issues:
        if issue.rule not in REPAIRABLE:
            raise Unrepairable(issue)

    decls = {d.name: d for d in tree.attributes}
    order = {d.name: i for i, d in enumerate(tree.attributes)}
    steps = list(plan.steps)

    # canonical inputs
    steps = [replace(s, inputs=registry.get(s.function).inputs) if registry.get(s.function) else s
             for s in steps]

    # keep the first of each singleton kind and of each attribute producer
    kept: list[Step] = []
    seen_kinds: set[str] = set()
    seen_attrs: set[str] = set()
    for s in steps:
        if s.kind in ("segment_organ", "segment_masses", "evaluate_tree", "aggregate", "assess_patient"):
            if s.kind in seen_kinds:
                continue
            seen_kinds.add(s.kind)
        elif s.attr is not None:
            if s.attr in seen_attrs:
                continue
            seen_attrs.add(s.attr)
        kept.append(s)
    steps = kept

    next_id = _id_allocator(steps)
    canonical = {s.kind: s for s in _canonical_steps(tree, registry) if s.kind not in ("measure_each", "classify_each")}

    # replace producers that disagree with the manifest
    fixed = []
    for s in steps:
        if s.kind in ("measure_each", "classify_each") and s.attr in decls:
            want = producer_step(decls[s.attr], registry, s.id, s.args.get("method"))
            if (s.kind, s.function) != (want.kind, want.function) or (
                    s.kind == "classify_each" and s.args != want.args):
                s = want
        fixed.append(s)
    steps = fixed

    # insert anything missing
    present_kinds = {s.kind for s in steps}
    for kind in ("segment_organ", "segment_masses", "evaluate_tree", "aggregate"):
        if kind not in present_kinds:
            steps.append(replace(canonical[kind], id=next_id()))
    if "assess_patient" not in present_kinds and "assess_patient" in canonical:
        steps.append(replace(canonical["assess_patient"], id=next_id()))
    elif "assess_patient" in canonical:
        want = canonical["assess_patient"].args["outputs"]
        steps = [replace(s, args={"outputs": list(want)}) if s.kind == "assess_patient" else s for s in steps]
    produced = {s.attr for s in steps if s.kind in ("measure_each", "classify_each")}
    for decl in tree.attributes:
        if decl.producer in ("measure", "classify") and decl.name not in produced:
            steps.append(producer_step(decl, registry, next_id()))

    # canonical stage order; producers by manifest order within their stage
    def key(item):
        pos, s = item
        rank = STEP_RANK.get(s.kind, 2)
        if s.kind == "assess_patient":
            return (rank, len(order) + 1, pos)
        return (rank, order.get(s.attr, len(order)), pos)

    steps = [s for _, s in sorted(enumerate(steps), key=key)]
    steps = renumber(steps)
    return make_plan(tree.ref, steps)


def _id_allocator(steps) -> Callable[[], str]:
    used = {s.id for s in steps}
    counter = [1]

    def nxt() -> str:
        while f"s{counter[0]}" in used:
            counter[0] += 1
        sid = f"s{counter[0]}"
        used.add(sid)
        return sid

    return nxt


# --- loop -------------------------------------------------------------------

def plan_loop(tree: GuidelineTree, registry: FunctionRegistry, max_iter: int = DEFAULT_MAX_ITER,
              draft: Plan | None = None, history: list | None = None, **synth_kwargs) -> Plan:
    """Draft, then validate and refine until the plan passes or ``max_iter`` validations fail.

    ``draft`` replaces the synthesized first draft (used to inject faults); every report is
    appended to ``history`` when given.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    plan = draft if draft is not None else synthesize_plan(tree, registry, **synth_kwargs)
    for iteration in range(1, max_iter + 1):
        report = validate_plan(plan, tree, registry)
        if history is not None:
            history.append(report)
        log.debug("plan iteration %d: %s", iteration, report.summary())
        if report.ok:
            return plan
        if iteration == max_iter:
            raise MaxIterationsExceeded(report, iteration)
        plan = refine_plan(plan, report, tree, registry)
    raise AssertionError("unreachable")


# --- remote planner ---------------------------------------------------------

class PlannerClient(Protocol):
    def request_plan(self, tree_document: dict, registry_manifest: dict) -> dict: ...


class HTTPPlannerClient:
    """POST {"tree": <document>, "registry": <manifest>} and read back a plan file body."""

    def __init__(self, url: str, timeout: float = 60.0):
        self.url = url
        self.timeout = timeout

    def request_plan(self, tree_document: dict, registry_manifest: dict) -> dict:
        body = json.dumps({"tree": tree_document, "registry": registry_manifest}).encode("utf-8")
        req = urllib.request.Request(self.url, data=body, method="POST",
                                     headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, ValueError) as exc:
            raise ProviderError(f"planner service {self.url} failed: {exc}") from exc


def external_plan(tree: GuidelineTree, registry: FunctionRegistry, client: PlannerClient) -> Plan:
    """Ask a remote planner for a plan and accept it only if it passes validate_plan."""
    try:
        body = client.request_plan(tree_to_document(tree), registry.to_manifest())
    except ProviderError:
        raise
    except Exception as exc:
        raise ProviderError(f"planner client failed: {exc}") from exc
    try:
        plan = Plan.from_json(body)
    except SchemaError as exc:
        raise ProviderError(f"planner returned a malformed plan: {exc}") from exc
    report = validate_plan(plan, tree, registry)
    if not report.ok:
        raise ValidationFailed(report)
    return plan
