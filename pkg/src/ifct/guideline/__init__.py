"""Parsed guideline decision trees."""

from .document import (
    dump_json,
    load_document,
    parse_guideline,
    predicate_from_json,
    predicate_to_json,
    read_guideline,
    serialize_guideline,
    tree_from_document,
    tree_to_document,
    write_guideline,
)
from .model import (
    And,
    AttributeDecl,
    CategoryOf,
    Compare,
    Decision,
    DecisionPath,
    GuidelineTree,
    InRange,
    Issue,
    Leaf,
    Not,
    Or,
    PatientRule,
    Predicate,
    iter_atoms,
    predicate_attrs,
)
from .remote import HTTPGuidelineParser
from .paths import check_path, enumerate_paths, path_in_tree, path_text, path_to_leaf
from .validate import validate_tree

__all__ = [name for name in dir() if not name.startswith("_")]
