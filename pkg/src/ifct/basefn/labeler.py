"""Embedding providers and the cosine-similarity labeler."""

from __future__ import annotations

import hashlib
import json
import re
import threading
import urllib.error
import urllib.request
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from ..errors import DimensionMismatch, EmptyLabelSet, ProviderError, ZeroVector

DEFAULT_DIM = 64
NORM_TOLERANCE = 1e-6


@runtime_checkable
class EmbeddingProvider(Protocol):
    """Maps text to a unit-length vector of fixed dimension; equal text gives equal vectors."""

    dim: int
    concurrent_safe: bool

    def embed(self, text: str) -> np.ndarray: ...


def _unit(vec: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise ZeroVector("cannot normalise a zero vector")
    return vec / norm


class HashEmbeddingProvider:
    """Deterministic local provider: a seeded hash of the text drives a Gaussian draw."""

    concurrent_safe = True

    def __init__(self, seed: int = 0, dim: int = DEFAULT_DIM):
        self.seed = int(seed)
        self.dim = int(dim)

    def embed(self, text: str) -> np.ndarray:
        digest = hashlib.sha256(f"{self.seed}\x00{text}".encode("utf-8")).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        return _unit(rng.standard_normal(self.dim))

    def __repr__(self) -> str:
        return f"HashEmbeddingProvider(seed={self.seed}, dim={self.dim})"


class RemoteEmbeddingProvider:
    """HTTP provider: POST {"texts": [...]} -> {"vectors": [[...]], "dim": k}."""

    concurrent_safe = True

    def __init__(self, url: str, timeout: float = 30.0):
        self.url = url
        self.timeout = timeout
        self.dim = 0

    def embed_many(self, texts: Sequence[str]) -> list[np.ndarray]:
        body = json.dumps({"texts": list(texts)}).encode("utf-8")
        req = urllib.request.Request(self.url, data=body, method="POST",
                                     headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                payload = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, ValueError) as exc:
            raise ProviderError(f"embedding service {self.url} failed: {exc}") from exc
        try:
            dim = int(payload["dim"])
            vectors = [np.asarray(v, dtype=float) for v in payload["vectors"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ProviderError(f"malformed embedding response: {exc}") from exc
        if len(vectors) != len(texts):
            raise ProviderError(f"expected {len(texts)} vectors, got {len(vectors)}")
        for v in vectors:
            if v.shape != (dim,):
                raise ProviderError(f"vector of shape {v.shape} does not match dim {dim}")
            if abs(float(np.linalg.norm(v)) - 1.0) > NORM_TOLERANCE:
                raise ProviderError("embedding service returned a non-unit vector")
        self.dim = dim
        return vectors

    def embed(self, text: str) -> np.ndarray:
        return self.embed_many([text])[0]


class SerializedProvider:
    """Wraps a provider that is not safe for concurrent calls behind a lock."""

    concurrent_safe = True

    def __init__(self, inner: EmbeddingProvider):
        self.inner = inner
        self._lock = threading.Lock()

    @property
    def dim(self) -> int:
        return self.inner.dim

    def embed(self, text: str) -> np.ndarray:
        with self._lock:
            return self.inner.embed(text)


def ensure_concurrent_safe(provider: EmbeddingProvider) -> EmbeddingProvider:
    if getattr(provider, "concurrent_safe", False):
        return provider
    return SerializedProvider(provider)


_SUBJECT_RE = re.compile(r"organ=(?P<organ>[^;]*); diameter_cm=(?P<d>[-0-9.]+); mean_hu=(?P<hu>[-0-9.]+)")


def render_subject(organ: str, diameter_cm: float, mean_hu: float) -> str:
    """Canonical text describing one segmented region, fed to the labeler."""
    return f"organ={organ}; diameter_cm={diameter_cm:.2f}; mean_hu={mean_hu:.1f}"


class PhantomEmbeddingProvider:
    """Provider calibrated to synthetic phantoms, standing in for a trained vision-language model.

    ``bands`` maps organ -> attribute -> label -> inclusive (lo, hi) HU range. Label texts
    embed to one-hot axes; a rendered region subject embeds to the normalised sum of the
    axes of every label whose band contains its mean HU. Anything else falls back to a
    hash embedding, so free text behaves like an uninformed model.
    """

    concurrent_safe = True

    def __init__(self, bands: dict, seed: int = 0, dim: int = DEFAULT_DIM):
        self.bands = bands
        self.dim = dim
        self._fallback = HashEmbeddingProvider(seed, dim)
        vocab = sorted({label for organ in bands.values() for attr in organ.values() for label in attr})
        if len(vocab) > dim:
            raise ValueError(f"{len(vocab)} labels do not fit in {dim} dimensions")
        self._axis = {label: i for i, label in enumerate(vocab)}

    def embed(self, text: str) -> np.ndarray:
        if text in self._axis:
            vec = np.zeros(self.dim)
            vec[self._axis[text]] = 1.0
            return vec
        m = _SUBJECT_RE.fullmatch(text)
        if m and m.group("organ") in self.bands:
            hu = float(m.group("hu"))
            vec = np.zeros(self.dim)
            for labels in self.bands[m.group("organ")].values():
                for label, (lo, hi) in labels.items():
                    if lo <= hu <= hi:
                        vec[self._axis[label]] = 1.0
            if vec.any():
                return _unit(vec)
        return self._fallback.embed(text)


def cosine_similarity(u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise DimensionMismatch(f"vector shapes differ: {u.shape} vs {v.shape}")
    nu, nv = float(np.linalg.norm(u)), float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise ZeroVector("cosine similarity of a zero vector")
    return float(np.dot(u, v) / (nu * nv))


def _embed(provider: EmbeddingProvider, text: str) -> np.ndarray:
    try:
        return provider.embed(text)
    except ProviderError:
        raise
    except Exception as exc:
        raise ProviderError(f"provider failed on {text!r}: {exc}") from exc


def argmax_first(scores: Sequence[float]) -> int:
    best = 0
    for i, s in enumerate(scores):
        if s > scores[best]:
            best = i
    return best


def classify_label(provider: EmbeddingProvider, subject_text: str,
                   labels: Sequence[str]) -> tuple[str, list[float]]:
    """Pick the label closest to the subject by cosine similarity; ties go to the earliest label."""
    labels = list(labels)
    if not labels:
        raise EmptyLabelSet("label list is empty")
    if len(set(labels)) != len(labels):
        raise ValueError(f"labels must be distinct: {labels}")
    subject = _embed(provider, subject_text)
    scores = [cosine_similarity(subject, _embed(provider, label)) for label in labels]
    return labels[argmax_first(scores)], scores
