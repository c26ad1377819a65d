"""Acceptance criteria, one test each. Every test records a PASS/FAIL line that is echoed
immediately and repeated in the terminal summary."""

import os
import time

import numpy as np
import pytest

from mutations import REPAIRABLE, mutation_suite
from oracles import cosine, per_class_f1, weighted_f1
from test_golden import golden
from ifct.basefn.geometry import diameter_equiv_sphere_mm, diameter_feret_mm, hausdorff_mm
from ifct.basefn.labeler import HashEmbeddingProvider
from ifct.bench import NoisyLabeler, OracleLabeler, compute_metrics, gen_suite, run_benchmark
from ifct.bench.baselines import baseline_path_similarity, random_baseline_accuracy
from ifct.bench.runner import default_workers
from ifct.data import load_example
from ifct.errors import MaxIterationsExceeded, Unrepairable
from ifct.executor import CaseResult, execute_tree, serialize_case_result
from ifct.guideline import enumerate_paths, parse_guideline, path_text, serialize_guideline
from ifct.attributes import AttributeMap, Quantity
from ifct.planner import Plan, default_registry, plan_loop, serialize_plan, synthesize_plan, validate_plan
from ifct.volume import Mask, mask_from_bytes, mask_to_bytes, volume_from_bytes, volume_to_bytes

pytestmark = pytest.mark.acceptance

RESULTS = []
ORGANS = ("liver", "renal", "pancreas")
SUITE_SIZE = int(os.environ.get("IFCT_ACCEPT_CASES", "200"))


def record(capsys, name, ok, detail, elapsed):
    line = f"ACCEPTANCE {'PASS' if ok else 'FAIL'} {name}: {detail} ({elapsed:.2f}s)"
    RESULTS.append(line)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


@pytest.fixture(scope="module")
def trees():
    return {o: load_example(o) for o in ORGANS}


@pytest.fixture(scope="module")
def closure(trees):
    """Generated suites plus their full-mode results, with the time spent producing them."""
    t0 = time.perf_counter()
    suites, full = {}, {}
    for organ, tree in trees.items():
        suites[organ] = list(gen_suite(tree, SUITE_SIZE, seed=2024))
        full[organ] = run_benchmark(tree, suites[organ], "full", workers=default_workers())
    return suites, full, time.perf_counter() - t0


def test_path_count_reproduction(trees, capsys):
    t0 = time.perf_counter()
    counts = [len(enumerate_paths(trees[o])) for o in ORGANS]
    accs = [round(random_baseline_accuracy(trees[o]), 4) for o in ORGANS]
    elapsed = time.perf_counter() - t0
    ok = counts == [10, 6, 14] and accs == [0.1, 0.1667, 0.0714] and elapsed < 1.0
    record(capsys, "path counts", ok, f"paths={counts} random={accs}", elapsed)


def test_branch_fidelity(trees, capsys):
    t0 = time.perf_counter()
    tree = trees["liver"]

    def walk(d, risk):
        return execute_tree(tree, AttributeMap(lesion_count=Quantity(1, "count"), diameter_cm=Quantity(d, "cm"),
                                               imaging_features="benign", risk=risk,
                                               known_malignancy=False, cirrhosis=False))

    low, high = walk(0.8, "Low").recommendation, walk(0.8, "High").recommendation
    at_one, at_mid = walk(1.0, "Low").steps, walk(1.2, "Low").steps
    elapsed = time.perf_counter() - t0
    ok = (low == "Benign; no further follow-up." and high == "Liver MRI in 3--6 months."
          and ("small", "true") in at_one and ("small", "false") in at_mid and ("mid", "true") in at_mid
          and elapsed < 1.0)
    record(capsys, "branch fidelity", ok, f"low={low!r} high={high!r}", elapsed)


def test_oracle_closure(closure, capsys):
    suites, full, elapsed = closure
    detail = " ".join(f"{o}:n={full[o].n_cases},acc={full[o].accuracy:.3f},expl={full[o].explanation_accuracy:.3f}"
                      for o in ORGANS)
    ok = all(full[o].n_cases >= 200 and full[o].accuracy == 1.0 and full[o].explanation_accuracy == 1.0
             for o in ORGANS) and elapsed < 120.0
    record(capsys, "oracle closure", ok, detail, elapsed)


def _pairwise(a, b):
    return np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1))


def test_geometry_oracles(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(77)
    worst = 0.0
    for _ in range(500):
        dims = tuple(int(x) for x in rng.integers(3, 12, 3))
        spacing = tuple(float(x) for x in rng.choice([0.5, 0.7, 1.0, 1.5, 2.5], 3))
        masks = []
        for _ in range(2):
            arr = np.zeros(dims, dtype=bool)
            n = int(rng.integers(1, min(200, arr.size) + 1))
            arr.flat[rng.choice(arr.size, n, replace=False)] = True
            masks.append(Mask(arr, spacing))
        sp = np.asarray(masks[0].spacing_mm, dtype=float)
        pts = [np.argwhere(m.voxels) * sp for m in masks]
        d = _pairwise(pts[0], pts[0])
        feret_ref = float(d.max())
        cross = _pairwise(pts[0], pts[1])
        haus_ref = float(max(cross.min(axis=1).max(), cross.min(axis=0).max()))
        for got, ref in ((diameter_feret_mm(masks[0]), feret_ref), (hausdorff_mm(*masks), haus_ref)):
            worst = max(worst, abs(got - ref) / ref if ref else abs(got))
    sphere_ok = True
    for diameter in range(10, 41):
        size = diameter + 5
        c = size // 2
        idx = np.indices((size, size, size)).reshape(3, -1).T - c
        arr = ((idx ** 2).sum(1) <= (diameter / 2) ** 2).reshape(size, size, size)
        m = Mask(arr)
        sphere_ok &= abs(diameter_feret_mm(m) - diameter) <= 2.0
        sphere_ok &= abs(diameter_equiv_sphere_mm(m) - diameter) <= 0.05 * diameter
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and sphere_ok and elapsed < 60.0
    record(capsys, "geometry oracles", ok, f"max rel err={worst:.2e} spheres_ok={sphere_ok}", elapsed)


def test_metrics_oracle(capsys):
    t0 = time.perf_counter()
    hand = compute_metrics(list("ABBBB"), list("AABBB"))
    ok = hand.accuracy == pytest.approx(0.8, abs=1e-12) and abs(hand.weighted_f1 - 0.7809) <= 1e-4
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 60))
        k = int(rng.integers(1, 7))
        truths = [f"c{x}" for x in rng.integers(0, k, n)]
        preds = [f"c{x}" for x in rng.integers(0, k + 1, n)]
        r = compute_metrics(preds, truths)
        brute = per_class_f1(preds, truths)
        worst = max(worst, abs(r.weighted_f1 - weighted_f1(preds, truths)),
                    abs(r.accuracy - sum(p == t for p, t in zip(preds, truths)) / n),
                    *(abs(c.f1 - brute[c.label][2]) for c in r.per_class))
    elapsed = time.perf_counter() - t0
    ok = ok and worst <= 1e-9
    record(capsys, "metrics oracle", ok,
           f"hand acc={hand.accuracy:.3f} wF1={hand.weighted_f1:.4f}; fuzz max err={worst:.1e}", elapsed)


def test_planner_stop_criterion(trees, capsys):
    t0 = time.perf_counter()
    reg = default_registry()
    drafts = [(trees[o], synthesize_plan(trees[o], reg)) for o in ORGANS]
    flagged = converged = repairable = unrepairable_ok = unrepairable = 0
    for cls, tree, plan in mutation_suite(drafts, n=20, seed=11):
        flagged += not validate_plan(plan, tree, reg).ok
        if cls in REPAIRABLE:
            repairable += 1
            try:
                converged += validate_plan(plan_loop(tree, reg, max_iter=3, draft=plan), tree, reg).ok
            except (MaxIterationsExceeded, Unrepairable):
                pass
        else:
            unrepairable += 1
            try:
                plan_loop(tree, reg, max_iter=3, draft=plan)
            except (MaxIterationsExceeded, Unrepairable):
                unrepairable_ok += 1
    elapsed = time.perf_counter() - t0
    ok = flagged == 20 and converged == repairable and unrepairable_ok == unrepairable and elapsed < 10.0
    record(capsys, "planner STOP", ok, f"flagged {flagged}/20, repaired {converged}/{repairable}, "
                                       f"unrepairable rejected {unrepairable_ok}/{unrepairable}", elapsed)


def test_baseline_behavior(trees, closure, capsys):
    suites, full, _ = closure
    t0 = time.perf_counter()
    provider = HashEmbeddingProvider(seed=3)
    mismatches, parts, ok = 0, [], True
    for organ in ORGANS:
        tree, cases = trees[organ], suites[organ]
        paths = enumerate_paths(tree)
        path_vecs = {}
        for c in cases:
            q = provider.embed(c.facts.text)
            sims = []
            for p in paths:
                key = (p.leaf_id, c.facts.patient_text)
                if key not in path_vecs:
                    path_vecs[key] = provider.embed(f"{path_text(tree, p)}; {c.facts.patient_text}")
                sims.append(cosine(q, path_vecs[key]))
            expected = paths[max(range(len(paths)), key=lambda i: (sims[i], -i))]
            got = baseline_path_similarity(tree, c.facts.text, c.facts.patient_text, provider)
            mismatches += got != expected
        base = run_benchmark(tree, cases, "baseline", provider=provider, workers=default_workers())
        ok &= base.accuracy < full[organ].accuracy
        parts.append(f"{organ}:{base.accuracy:.3f}<{full[organ].accuracy:.3f}")
    elapsed = time.perf_counter() - t0
    ok &= mismatches == 0
    record(capsys, "baseline behavior", ok, f"argmax mismatches={mismatches}; " + " ".join(parts), elapsed)


def test_ablation_ordering(trees, closure, capsys):
    suites, full, _ = closure
    t0 = time.perf_counter()
    parts, ok = [], True
    for organ in ORGANS:
        tree, cases = trees[organ], suites[organ]
        noisy = run_benchmark(tree, cases, "ablated", labeler=NoisyLabeler(OracleLabeler(tree), 0.3, seed=1))
        perfect = run_benchmark(tree, cases, "ablated", labeler=OracleLabeler(tree))
        ok &= noisy.accuracy < full[organ].accuracy and perfect.accuracy == full[organ].accuracy
        parts.append(f"{organ}:noisy={noisy.accuracy:.3f} perfect={perfect.accuracy:.3f} "
                     f"full={full[organ].accuracy:.3f}")
    elapsed = time.perf_counter() - t0
    record(capsys, "ablation ordering", ok, "; ".join(parts), elapsed)


def test_format_golden_files(capsys):
    t0 = time.perf_counter()
    liver = load_example("liver")
    checks = {
        "volume.ctv": lambda b: volume_to_bytes(volume_from_bytes(b)),
        "mask.ctk": lambda b: mask_to_bytes(mask_from_bytes(b)),
        "liver_tree.json": lambda b: serialize_guideline(parse_guideline(b)).encode(),
        "liver_plan.json": lambda b: serialize_plan(Plan.from_json(b)).encode(),
        "case_result.json": lambda b: serialize_case_result(CaseResult.from_json(__import__("json").loads(b)),
                                                             liver, timing=False).encode(),
    }
    same = {name: fn(golden(name)) == golden(name) for name, fn in checks.items()}
    elapsed = time.perf_counter() - t0
    record(capsys, "format golden files", all(same.values()),
           ", ".join(f"{k}={'ok' if v else 'DIFF'}" for k, v in same.items()), elapsed)
