"""Benchmark harness: case files, manifests and per-mode evaluation."""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..basefn.labeler import EmbeddingProvider, PhantomEmbeddingProvider, ensure_concurrent_safe
from ..errors import EmptyInput, IFCTError, SchemaError
from ..executor import execute_plan
from ..guideline import DecisionPath, GuidelineTree, dump_json
from ..planner import FunctionRegistry, Plan, default_registry, plan_loop
from ..volume import read_volume, write_volume
from .baselines import Labeler, ablated_predict, ablated_questions, baseline_path_similarity, random_path
from .metrics import EvalResult, compute_metrics
from .phantom import GeneratedCase, Oracle, SyntheticSpec, phantom_bands
from .report import ReportFacts

log = logging.getLogger(__name__)

MODES = ("full", "ablated", "baseline", "random")


# --- case files --------------------------------------------------------------

def write_case(case: GeneratedCase, directory) -> Path:
    """Write ``<id>.ctv`` and ``<id>.json`` into ``directory``; returns the JSON path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_volume(case.volume, directory / f"{case.case_id}.ctv")
    doc = {"case_id": case.case_id, "volume": f"{case.case_id}.ctv", "spec": case.spec.to_json(),
           "facts": case.facts.to_json(), "oracle": case.oracle.to_json()}
    path = directory / f"{case.case_id}.json"
    path.write_text(dump_json(doc), encoding="utf-8")
    return path


def read_case(path) -> GeneratedCase:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
        spec = SyntheticSpec.from_json(doc["spec"])
        return GeneratedCase(doc["case_id"], spec, read_volume(path.parent / doc["volume"]), spec.patient,
                             ReportFacts.from_json(doc["facts"]), Oracle.from_json(doc["oracle"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad case file {path}: {exc}") from None


@dataclass
class Manifest:
    tree: str
    tree_ref: dict
    mode: str
    seed: int
    cases: list[str]

    def to_json(self) -> dict:
        return {"tree": self.tree, "tree_ref": dict(self.tree_ref), "mode": self.mode,
                "seed": self.seed, "cases": list(self.cases)}


def write_manifest(manifest: Manifest, path) -> None:
    Path(path).write_text(dump_json(manifest.to_json()), encoding="utf-8")


def read_manifest(path) -> Manifest:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return Manifest(str(doc["tree"]), dict(doc["tree_ref"]), str(doc.get("mode", "full")),
                        int(doc.get("seed", 0)), [str(c) for c in doc["cases"]])
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise SchemaError(f"bad manifest {path}: {exc}") from None


def resolve(manifest_path, relative: str) -> Path:
    p = Path(relative)
    return p if p.is_absolute() else Path(manifest_path).parent / p


# --- evaluation --------------------------------------------------------------

@dataclass
class CasePrediction:
    case_id: str
    truth: DecisionPath
    pred: DecisionPath | None
    error: str | None = None

    def to_json(self) -> dict:
        return {"case_id": self.case_id, "truth": self.truth.leaf_id,
                "pred": self.pred.leaf_id if self.pred else None, "error": self.error}


def default_provider() -> EmbeddingProvider:
    return PhantomEmbeddingProvider(phantom_bands())


def predict_cases(tree: GuidelineTree, cases: Sequence[GeneratedCase], mode: str,
                  provider: EmbeddingProvider | None = None, labeler: Labeler | None = None,
                  seed: int = 0, registry: FunctionRegistry | None = None, plan: Plan | None = None,
                  workers: int = 1, background_in_query: bool = False) -> list[CasePrediction]:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if not cases:
        raise EmptyInput("benchmark needs at least one case")

    if mode == "random":
        rng = np.random.default_rng(seed)
        return [CasePrediction(c.case_id, c.oracle.path, random_path(tree, rng)) for c in cases]

    if mode == "full":
        registry = registry or default_registry()
        plan = plan or plan_loop(tree, registry)
        provider = ensure_concurrent_safe(provider or default_provider())

        def one(case):
            return execute_plan(plan, tree, case.volume, case.patient, provider, registry).aggregated.path
    elif mode == "baseline":
        if provider is None:
            raise ValueError("baseline mode needs an embedding provider")
        provider = ensure_concurrent_safe(provider)

        def one(case):
            return baseline_path_similarity(tree, case.facts.text, case.facts.patient_text, provider,
                                            background_in_query)
    else:
        if labeler is None:
            raise ValueError("ablated mode needs a labeler")
        questions = ablated_questions(tree)

        def one(case):
            return ablated_predict(tree, case, labeler, questions)

    def guarded(case):
        try:
            return CasePrediction(case.case_id, case.oracle.path, one(case))
        except IFCTError as exc:
            log.warning("case %s failed: %s", case.case_id, exc)
            return CasePrediction(case.case_id, case.oracle.path, None, f"{type(exc).__name__}: {exc}")

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(guarded, cases))
    return [guarded(c) for c in cases]


ERROR_LEAF = "<error>"


def score(predictions: Sequence[CasePrediction], mode: str = "") -> EvalResult:
    preds = [p.pred.leaf_id if p.pred else ERROR_LEAF for p in predictions]
    truths = [p.truth.leaf_id for p in predictions]
    result = compute_metrics(preds, truths, [p.pred for p in predictions], [p.truth for p in predictions])
    result.mode = mode
    result.errors = [(p.case_id, p.error) for p in predictions if p.error]
    return result


def run_benchmark(tree: GuidelineTree, cases: Sequence[GeneratedCase], mode: str, **kwargs) -> EvalResult:
    """Predict every case in ``mode`` and score against the oracle paths.

    Failed cases count as wrong and are listed in ``errors``.
    """
    return score(predict_cases(tree, cases, mode, **kwargs), mode)


def default_workers() -> int:
    return max(1, min(8, (os.cpu_count() or 1)))
