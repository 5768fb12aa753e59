"""Intent-aligned evaluation metrics and the per-run metric time series.

Stability is the mean pairwise scorer similarity between a batch of
generated samples and a set of intent-related reference crops.
Controllability is the mean two-way softmax preference of each sample
toward the intended keyword over its opposite, computed in the
numerically stable logistic form.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

from .errors import EmptyBatch, EmptyReferences, NonMonotonicStep, ValidationError


@dataclass
class SampleBatch:
    images: list
    prompt: str
    checkpoint_id: str = ""
    step: int = 0

    def __post_init__(self):
        if not self.images:
            raise EmptyBatch("sample batch needs at least one image")

    @property
    def size(self) -> int:
        return len(self.images)


@dataclass
class ReferenceSet:
    crops: list
    concept_name: str

    def __post_init__(self):
        if not self.crops:
            raise EmptyReferences(
                f"reference set for {self.concept_name!r} is empty"
            )

    @property
    def size(self) -> int:
        return len(self.crops)


class SimilarityScorer(Protocol):
    name: str

    def sim(self, image_a, image_b) -> float: ...

    def sim_text(self, image, text: str) -> float: ...


@dataclass(frozen=True)
class KeywordPair:
    intended: str
    opposing: str
    concept_name: str

    def __post_init__(self):
        if not self.intended or not self.opposing:
            raise ValidationError("keyword pair entries must be non-empty")
        if self.intended == self.opposing:
            raise ValidationError("keyword pair entries must differ")

    def swapped(self) -> "KeywordPair":
        return KeywordPair(self.opposing, self.intended, self.concept_name)


class HashScorer:
    """Deterministic mock scorer: cosine similarity of hash-derived unit
    embeddings, mapped to [0, 1]."""

    name = "hash-scorer"

    def __init__(self, dim: int = 256):
        self.dim = dim

    def _embed(self, key: bytes):
        import hashlib

        import numpy as np

        digest = hashlib.sha256(key).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
        vec = rng.standard_normal(self.dim)
        return vec / np.linalg.norm(vec)

    def _embed_image(self, image):
        import numpy as np

        arr = np.ascontiguousarray(image)
        return self._embed(str(arr.shape).encode() + arr.tobytes())

    def sim(self, image_a, image_b) -> float:
        cos = float(self._embed_image(image_a) @ self._embed_image(image_b))
        return (cos + 1.0) / 2.0

    def sim_text(self, image, text: str) -> float:
        cos = float(self._embed_image(image) @ self._embed(text.encode("utf-8")))
        return (cos + 1.0) / 2.0


def stability(batch: SampleBatch, refs: ReferenceSet, scorer: SimilarityScorer) -> float:
    """Mean of sim(sample, reference) over all sample x reference pairs."""
    total = 0.0
    for ref in refs.crops:
        for image in batch.images:
            total += scorer.sim(image, ref)
    return total / (refs.size * batch.size)


def controllability(batch: SampleBatch, pair: KeywordPair, scorer: SimilarityScorer) -> float:
    """Mean softmax preference toward the intended keyword, in (0, 1).

    Per image: e^{s1} / (e^{s1} + e^{s2}), evaluated as the logistic
    1 / (1 + e^{s2 - s1}) so large similarities cannot overflow.
    """
    total = 0.0
    for image in batch.images:
        s1 = scorer.sim_text(image, pair.intended)
        s2 = scorer.sim_text(image, pair.opposing)
        total += 1.0 / (1.0 + math.exp(s2 - s1))
    return total / batch.size


@dataclass
class MetricSeries:
    metric_name: str
    concept_name: str = ""
    points: list[tuple[int, float]] = field(default_factory=list)


def append_point(series: MetricSeries, step: int, value: float) -> MetricSeries:
    if series.points and step <= series.points[-1][0]:
        raise NonMonotonicStep(
            f"step {step} not greater than last step {series.points[-1][0]} "
            f"in series {series.metric_name!r}"
        )
    series.points.append((step, value))
    return series


def rank_scores(scores: list[tuple[str, float]]) -> list[tuple[str, float]]:
    """Descending by value; ties broken by name ascending."""
    return sorted(scores, key=lambda s: (-s[1], s[0]))


def append_series_line(
    path: Path, step: int, value: float, metric_name: str,
    concept_name: str, prompt: str,
) -> None:
    """Append one point to the series' JSON-lines file."""
    line = json.dumps(
        {
            "step": step,
            "value": value,
            "metric_name": metric_name,
            "concept_name": concept_name,
            "prompt": prompt,
        },
        ensure_ascii=False,
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a", encoding="utf-8") as fh:
        fh.write(line + "\n")


def read_series_file(path: Path) -> list[dict]:
    if not path.exists():
        return []
    return [
        json.loads(line)
        for line in path.read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
