"""Typed guideline trees: predicates, nodes, attribute manifest, patient rules and paths."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Union

COMPARE_OPS = ("le", "lt", "gt", "ge", "eq")
CLOSEDNESS = ("right", "left", "both", "neither")
ATTR_TYPES = ("real", "category", "boolean")
PRODUCERS = ("measure", "classify", "patient", "segment")


@dataclass(frozen=True)
class Compare:
    attr: str
    op: str
    value: Union[float, str, bool]
    unit: str | None = None


@dataclass(frozen=True)
class InRange:
    """``lo < x <= hi`` by default; ``closed`` picks which ends are inclusive."""

    attr: str
    lo: float
    hi: float
    unit: str | None = None
    closed: str = "right"


@dataclass(frozen=True)
class CategoryOf:
    attr: str


@dataclass(frozen=True)
class And:
    args: tuple["Predicate", ...]


@dataclass(frozen=True)
class Or:
    args: tuple["Predicate", ...]


@dataclass(frozen=True)
class Not:
    arg: "Predicate"


Predicate = Union[Compare, InRange, CategoryOf, And, Or, Not]


def iter_atoms(pred: Predicate) -> Iterator[Predicate]:
    """Leaf predicates (Compare, InRange, CategoryOf) in left-to-right order."""
    if isinstance(pred, (And, Or)):
        for a in pred.args:
            yield from iter_atoms(a)
    elif isinstance(pred, Not):
        yield from iter_atoms(pred.arg)
    else:
        yield pred


def predicate_attrs(pred: Predicate) -> list[str]:
    seen: dict[str, None] = {}
    for atom in iter_atoms(pred):
        seen.setdefault(atom.attr, None)
    return list(seen)


@dataclass(frozen=True)
class AttributeDecl:
    name: str
    type: str
    producer: str
    unit: str | None = None
    function: str | None = None
    method: str | None = None
    categories: tuple[str, ...] | None = None


@dataclass(frozen=True)
class PatientRule:
    output_attr: str
    cases: tuple[tuple[Predicate, str], ...]
    default: str


@dataclass(frozen=True)
class Decision:
    id: str
    predicate: Predicate
    branches: dict[str, str]
    text: str = ""

    @property
    def is_leaf(self) -> bool:
        return False


@dataclass(frozen=True)
class Leaf:
    id: str
    recommendation: str
    severity: int
    text: str = ""

    @property
    def is_leaf(self) -> bool:
        return True


Node = Union[Decision, Leaf]


@dataclass
class GuidelineTree:
    organ: str
    version: str
    root_id: str
    nodes: dict[str, Node]
    attributes: list[AttributeDecl] = field(default_factory=list)
    risk_rules: list[PatientRule] = field(default_factory=list)
    title: str = ""
    no_lesion_leaf: str | None = None

    def attribute(self, name: str) -> AttributeDecl | None:
        for decl in self.attributes:
            if decl.name == name:
                return decl
        return None

    def leaves(self) -> list[Leaf]:
        return [n for n in self.nodes.values() if isinstance(n, Leaf)]

    @property
    def ref(self) -> dict:
        return {"organ": self.organ, "version": self.version}


@dataclass(frozen=True)
class DecisionPath:
    steps: tuple[tuple[str, str], ...]
    leaf_id: str
    recommendation: str

    def to_json(self) -> dict:
        return {"steps": [[n, b] for n, b in self.steps], "leaf_id": self.leaf_id,
                "recommendation": self.recommendation}

    @classmethod
    def from_json(cls, obj: dict) -> "DecisionPath":
        return cls(tuple((str(n), str(b)) for n, b in obj["steps"]), str(obj["leaf_id"]),
                   str(obj["recommendation"]))


@dataclass(frozen=True)
class Issue:
    node: str | None
    rule: str
    message: str = ""

    def __str__(self) -> str:
        where = f"[{self.node}] " if self.node else ""
        return f"{where}{self.rule}: {self.message}" if self.message else f"{where}{self.rule}"
