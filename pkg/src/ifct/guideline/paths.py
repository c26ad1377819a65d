"""Root-to-leaf path enumeration, membership checks and rendering."""

from __future__ import annotations

from ..errors import PathMismatch
from .model import Decision, DecisionPath, GuidelineTree, Leaf

STEP_SEP = "; "
BRANCH_SEP = " -> "


def enumerate_paths(tree: GuidelineTree) -> list[DecisionPath]:
    """Every root-to-leaf path, depth first, visiting branches in document order."""
    paths: list[DecisionPath] = []

    def walk(nid: str, steps: tuple) -> None:
        node = tree.nodes[nid]
        if isinstance(node, Leaf):
            paths.append(DecisionPath(steps, nid, node.recommendation))
            return
        for label, child in node.branches.items():
            walk(child, steps + ((nid, label),))

    walk(tree.root_id, ())
    return paths


def check_path(tree: GuidelineTree, path: DecisionPath) -> None:
    """Raise PathMismatch unless ``path`` is a connected root-to-leaf walk of ``tree``."""
    expected = tree.root_id
    for nid, label in path.steps:
        if nid != expected:
            raise PathMismatch(f"step {nid!r} does not follow from {expected!r}")
        node = tree.nodes.get(nid)
        if not isinstance(node, Decision):
            raise PathMismatch(f"step {nid!r} is not a decision node of the tree")
        if label not in node.branches:
            raise PathMismatch(f"node {nid!r} has no branch {label!r}")
        expected = node.branches[label]
    if path.leaf_id != expected:
        raise PathMismatch(f"path ends at {expected!r}, not leaf {path.leaf_id!r}")
    leaf = tree.nodes.get(path.leaf_id)
    if not isinstance(leaf, Leaf):
        raise PathMismatch(f"{path.leaf_id!r} is not a leaf")
    if leaf.recommendation != path.recommendation:
        raise PathMismatch(f"recommendation differs from leaf {path.leaf_id!r}")


def path_in_tree(tree: GuidelineTree, path: DecisionPath) -> bool:
    try:
        check_path(tree, path)
    except PathMismatch:
        return False
    return True


def path_text(tree: GuidelineTree, path: DecisionPath) -> str:
    """``"<node text> -> <branch>; ...; <recommendation>"`` for a path of the tree."""
    check_path(tree, path)
    parts = [f"{tree.nodes[nid].text}{BRANCH_SEP}{label}" for nid, label in path.steps]
    parts.append(path.recommendation)
    return STEP_SEP.join(parts)


def path_to_leaf(tree: GuidelineTree, leaf_id: str) -> DecisionPath:
    for path in enumerate_paths(tree):
        if path.leaf_id == leaf_id:
            return path
    raise PathMismatch(f"no path ends at {leaf_id!r}")
