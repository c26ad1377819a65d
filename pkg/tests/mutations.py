"""Fault injection for plans: each mutation returns (class, plan)."""

from dataclasses import replace

import numpy as np

from ifct.planner import make_plan

CLASSES = ("missing producer", "misordered", "duplicate aggregate", "unknown function")
REPAIRABLE = CLASSES[:3]


def mutate(plan, cls, rng):
    steps = list(plan.steps)
    if cls == "missing producer":
        idx = [i for i, s in enumerate(steps) if s.kind in ("measure_each", "classify_each")]
        del steps[idx[int(rng.integers(len(idx)))]]
    elif cls == "misordered":
        if rng.random() < 0.5:
            agg = next(i for i, s in enumerate(steps) if s.kind == "aggregate")
            ev = next(i for i, s in enumerate(steps) if s.kind == "evaluate_tree")
            steps.insert(ev, steps.pop(agg))
        else:
            idx = [i for i, s in enumerate(steps) if s.kind in ("measure_each", "classify_each")]
            steps.insert(0, steps.pop(idx[int(rng.integers(len(idx)))]))
    elif cls == "duplicate aggregate":
        agg = next(s for s in steps if s.kind == "aggregate")
        steps.insert(int(rng.integers(len(steps) - 1, len(steps) + 1)), replace(agg, id="s99"))
    else:
        i = int(rng.integers(len(steps)))
        steps[i] = replace(steps[i], function="segment_kidneys_v2")
    return make_plan(plan.tree_ref, steps)


def mutation_suite(drafts, n=20, seed=0):
    """``n`` mutated plans cycling through the fault classes and the given (tree, draft) pairs."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n):
        tree, draft = drafts[k % len(drafts)]
        cls = CLASSES[k % len(CLASSES)]
        out.append((cls, tree, mutate(draft, cls, rng)))
    return out
