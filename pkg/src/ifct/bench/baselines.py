"""Comparison predictors: path-similarity baseline, random choice, and the no-segmentation ablation."""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from ..attributes import AttributeMap, Quantity, convert
from ..basefn.labeler import EmbeddingProvider, argmax_first, classify_label, cosine_similarity
from ..errors import ProviderError
from ..executor import evaluate_predicate, execute_tree
from ..guideline import DecisionPath, GuidelineTree, enumerate_paths, path_text
from ..guideline.model import Compare, InRange, iter_atoms
from .phantom import GeneratedCase, patient_facts


# --- path similarity ---------------------------------------------------------

def _embed(provider: EmbeddingProvider, text: str) -> np.ndarray:
    try:
        return provider.embed(text)
    except ProviderError:
        raise
    except Exception as exc:
        raise ProviderError(f"provider failed: {exc}") from exc


def baseline_scores(tree: GuidelineTree, facts_text: str, patient_text: str, provider: EmbeddingProvider,
                    background_in_query: bool = False) -> tuple[list[DecisionPath], list[float]]:
    paths = enumerate_paths(tree)
    if background_in_query:
        query = _embed(provider, f"{facts_text} {patient_text}")
        docs = [path_text(tree, p) for p in paths]
    else:
        query = _embed(provider, facts_text)
        docs = [f"{path_text(tree, p)}; {patient_text}" for p in paths]
    return paths, [cosine_similarity(query, _embed(provider, d)) for d in docs]


def baseline_path_similarity(tree: GuidelineTree, facts_text: str, patient_text: str,
                             provider: EmbeddingProvider, background_in_query: bool = False) -> DecisionPath:
    """Path whose rendered text (plus patient background) is most similar to the findings.

    ``background_in_query`` moves the background from each path text onto the findings query.
    """
    paths, scores = baseline_scores(tree, facts_text, patient_text, provider, background_in_query)
    return paths[argmax_first(scores)]


def random_baseline_accuracy(tree: GuidelineTree) -> float:
    return 1.0 / len(enumerate_paths(tree))


def random_path(tree: GuidelineTree, rng: np.random.Generator) -> DecisionPath:
    paths = enumerate_paths(tree)
    return paths[int(rng.integers(len(paths)))]


# --- quantized bins ----------------------------------------------------------

@dataclass(frozen=True)
class Bin:
    attr: str
    unit: str
    lo: float
    hi: float
    lo_closed: bool
    hi_closed: bool
    representative: float

    @property
    def label(self) -> str:
        if self.lo == self.hi:
            return f"{self.attr} = {self.lo:g} {self.unit}"
        if math.isinf(self.lo):
            return f"{self.attr} {'<=' if self.hi_closed else '<'} {self.hi:g} {self.unit}"
        if math.isinf(self.hi):
            return f"{self.attr} {'>=' if self.lo_closed else '>'} {self.lo:g} {self.unit}"
        left = "[" if self.lo_closed else "("
        right = "]" if self.hi_closed else ")"
        return f"{self.attr} in {left}{self.lo:g}, {self.hi:g}{right} {self.unit}"

    def contains(self, x: float) -> bool:
        lo_ok = x >= self.lo if self.lo_closed else x > self.lo
        hi_ok = x <= self.hi if self.hi_closed else x < self.hi
        return lo_ok and hi_ok


def _atoms_on(tree: GuidelineTree, attr: str) -> list:
    out = []
    for node in tree.nodes.values():
        pred = getattr(node, "predicate", None)
        if pred is None:
            continue
        for atom in iter_atoms(pred):
            if getattr(atom, "attr", None) == attr and isinstance(atom, (Compare, InRange)) \
                    and not isinstance(getattr(atom, "value", 0.0), (bool, str)):
                out.append(atom)
    return out


def _signature(atoms, attr: str, unit: str, x: float) -> tuple:
    attrs = {attr: Quantity(x, unit)}
    return tuple(evaluate_predicate(a, attrs) for a in atoms)


def quantize(tree: GuidelineTree, attr: str, unit: str) -> list[Bin]:
    """Split the real line into maximal intervals on which every predicate over ``attr`` agrees.

    Candidate pieces are each threshold (a point) and the open gaps between and beyond them;
    adjacent pieces with equal predicate signatures merge into one bin.
    """
    atoms = _atoms_on(tree, attr)
    ts = set()
    for a in atoms:
        if isinstance(a, InRange):
            ts.update((convert(a.lo, a.unit, unit), convert(a.hi, a.unit, unit)))
        else:
            ts.add(convert(float(a.value), a.unit, unit))
    ts = sorted(ts)
    if not ts:
        return [Bin(attr, unit, -math.inf, math.inf, False, False, 0.0)]
    # pieces: (lo, hi, lo_closed, hi_closed, sample point)
    pieces = [(-math.inf, ts[0], False, False, ts[0] - 1.0)]
    for i, t in enumerate(ts):
        pieces.append((t, t, True, True, t))
        nxt = ts[i + 1] if i + 1 < len(ts) else math.inf
        mid = (t + nxt) / 2.0 if nxt != math.inf else t + 1.0
        pieces.append((t, nxt, False, False, mid))
    merged: list[dict] = []
    for lo, hi, lc, hc, x in pieces:
        sig = _signature(atoms, attr, unit, x)
        is_open = lo != hi
        if merged and merged[-1]["sig"] == sig:
            cur = merged[-1]
            cur["hi"], cur["hc"] = hi, hc
            if is_open and not cur["open"]:
                cur["rep"], cur["open"] = x, True
        else:
            merged.append({"sig": sig, "lo": lo, "hi": hi, "lc": lc, "hc": hc, "rep": x, "open": is_open})
    return [Bin(attr, unit, b["lo"], b["hi"], b["lc"], b["hc"], b["rep"]) for b in merged]


def ablated_questions(tree: GuidelineTree) -> dict[str, list]:
    """Attribute -> answer options for every image-derived attribute.

    Real attributes get quantized bins; classify attributes keep their categories.
    """
    out: dict[str, list] = {}
    for decl in tree.attributes:
        if decl.producer in ("measure", "segment") and decl.type == "real":
            out[decl.name] = quantize(tree, decl.name, decl.unit)
        elif decl.producer == "classify":
            out[decl.name] = list(decl.categories)
    return out


# --- labelers ----------------------------------------------------------------

class Labeler(Protocol):
    def label(self, case: GeneratedCase, attr: str, options: Sequence[str]) -> str: ...


def _index_value(case: GeneratedCase, tree: GuidelineTree, attr: str):
    """Value of ``attr`` for the finding that drives the case's recommendation."""
    if attr in case.facts.case_attrs:
        return case.facts.case_attrs[attr]
    src = case.oracle.aggregated.source_lesion_id
    for lf in case.facts.lesions:
        if lf.lesion_id == src:
            return lf.attributes.get(attr)
    return None


class OracleLabeler:
    """Answers with the option that holds for the index finding."""

    def __init__(self, tree: GuidelineTree):
        self.tree = tree
        self.questions = ablated_questions(tree)

    def label(self, case: GeneratedCase, attr: str, options: Sequence[str]) -> str:
        value = _index_value(case, self.tree, attr)
        opts = self.questions[attr]
        if isinstance(value, Quantity):
            x = value.to(opts[0].unit)
            for b in opts:
                if b.contains(x):
                    return b.label
        elif isinstance(value, str) and value in options:
            return value
        return options[0]


class NoisyLabeler:
    """Wraps a labeler and replaces its answer by a different option with probability ``flip_rate``."""

    def __init__(self, base: Labeler, flip_rate: float = 0.3, seed: int = 0):
        if not 0.0 <= flip_rate <= 1.0:
            raise ValueError("flip_rate must lie in [0, 1]")
        self.base = base
        self.flip_rate = flip_rate
        self.seed = seed

    def label(self, case: GeneratedCase, attr: str, options: Sequence[str]) -> str:
        answer = self.base.label(case, attr, options)
        others = [o for o in options if o != answer]
        # per-question stream so answers do not depend on evaluation order
        rng = np.random.default_rng([self.seed, case.spec.seed, zlib.crc32(attr.encode())])
        if others and rng.random() < self.flip_rate:
            return others[int(rng.integers(len(others)))]
        return answer


class EmbeddingLabeler:
    """Asks an embedding provider to pick among option texts for a scan-level subject."""

    def __init__(self, provider: EmbeddingProvider):
        self.provider = provider

    def label(self, case: GeneratedCase, attr: str, options: Sequence[str]) -> str:
        subject = f"organ={case.spec.organ}; scan={case.case_id}; question={attr}"
        return classify_label(self.provider, subject, list(options))[0]


def ablated_predict(tree: GuidelineTree, case: GeneratedCase, labeler: Labeler,
                    questions: dict | None = None) -> DecisionPath:
    """Tree walk on one pseudo-finding whose image attributes all come from the labeler."""
    questions = questions or ablated_questions(tree)
    attrs = AttributeMap()
    for attr, opts in questions.items():
        if opts and isinstance(opts[0], Bin):
            labels = [b.label for b in opts]
            answer = labeler.label(case, attr, labels)
            chosen = opts[labels.index(answer)] if answer in labels else opts[0]
            attrs[attr] = Quantity(chosen.representative, chosen.unit)
        else:
            attrs[attr] = labeler.label(case, attr, opts)
    return execute_tree(tree, attrs.merged(patient_facts(tree, case.patient)))
