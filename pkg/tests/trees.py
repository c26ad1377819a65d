"""Hypothesis strategy for random valid guideline documents over a small fixed manifest."""

from hypothesis import strategies as st

MANIFEST = [
    {"name": "diameter_cm", "type": "real", "producer": "measure", "unit": "cm",
     "function": "calc_mass_diameter_cm", "method": "feret"},
    {"name": "mean_hu", "type": "real", "producer": "measure", "unit": "HU", "function": "mean_intensity_hu"},
    {"name": "texture", "type": "category", "producer": "classify", "function": "classify_label",
     "categories": ["homogeneous", "heterogeneous"]},
    {"name": "known_malignancy", "type": "boolean", "producer": "patient"},
    {"name": "risk", "type": "category", "producer": "patient", "categories": ["Low", "High"]},
]
RISK_RULE = {"output": "risk", "cases": [{"when": {"op": "eq", "attr": "known_malignancy", "value": True},
                                          "category": "High"}], "default": "Low"}


@st.composite
def atoms(draw):
    kind = draw(st.sampled_from(["cmp_cm", "cmp_mm", "range", "hu", "flag", "texture", "risk"]))
    if kind == "cmp_cm":
        return {"op": draw(st.sampled_from(["le", "lt", "gt", "ge"])), "attr": "diameter_cm",
                "value": draw(st.sampled_from([0.5, 1.0, 1.5, 2.0])), "unit": "cm"}
    if kind == "cmp_mm":
        return {"op": draw(st.sampled_from(["le", "gt"])), "attr": "diameter_cm",
                "value": draw(st.sampled_from([5.0, 12.0, 30.0])), "unit": "mm"}
    if kind == "range":
        lo = draw(st.sampled_from([0.5, 1.0]))
        return {"op": "in_range", "attr": "diameter_cm", "lo": lo, "hi": lo + draw(st.sampled_from([0.5, 1.0])),
                "unit": "cm", "closed": draw(st.sampled_from(["right", "left", "both", "neither"]))}
    if kind == "hu":
        return {"op": "ge", "attr": "mean_hu", "value": draw(st.sampled_from([0.0, 20.0, 40.0])), "unit": "HU"}
    if kind == "flag":
        return {"op": "eq", "attr": "known_malignancy", "value": draw(st.booleans())}
    if kind == "texture":
        return {"op": "eq", "attr": "texture", "value": draw(st.sampled_from(["homogeneous", "heterogeneous"]))}
    return {"op": "eq", "attr": "risk", "value": draw(st.sampled_from(["Low", "High"]))}


@st.composite
def predicates(draw):
    shape = draw(st.sampled_from(["atom", "atom", "and", "or", "not"]))
    if shape == "atom":
        return draw(atoms())
    if shape == "not":
        return {"op": "not", "arg": draw(atoms())}
    return {"op": shape, "args": draw(st.lists(atoms(), min_size=2, max_size=3))}


@st.composite
def tree_documents(draw, max_depth=3, organ="liver"):
    nodes = {}

    def build(depth):
        nid = f"n{len(nodes) + 1}"
        nodes[nid] = None
        if depth == max_depth or (depth > 0 and draw(st.booleans())):
            nodes[nid] = {"kind": "leaf", "recommendation": f"Recommendation {nid}.",
                          "severity": draw(st.integers(0, 9)), "text": f"leaf {nid}"}
            return nid
        if draw(st.integers(0, 4)) == 0:
            pred = {"op": "category_of", "attr": draw(st.sampled_from(["texture", "risk"]))}
            labels = ["homogeneous", "heterogeneous"] if pred["attr"] == "texture" else ["Low", "High"]
        else:
            pred = draw(predicates())
            labels = ["true", "false"]
        node = {"kind": "decision", "predicate": pred, "branches": {}, "text": f"check {nid}"}
        nodes[nid] = node
        for label in labels:
            node["branches"][label] = build(depth + 1)
        return nid

    root = build(0)
    return {"organ": organ, "version": "t", "attributes": MANIFEST, "risk_rules": [RISK_RULE],
            "root": root, "nodes": nodes}
