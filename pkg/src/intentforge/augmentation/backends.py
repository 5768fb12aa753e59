"""Detector / embedder / inpainter interfaces and their deterministic
mock implementations.

Images are numpy uint8 arrays of shape (H, W, 3). The mocks make the
whole pipeline reproducible without model weights: the detector reads
boxes from a manifest, the embedder hashes pixels into a fixed unit
vector, and the inpainter fills masked pixels with the regional mean.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from ..errors import DetectorFailure, ValidationError
from ..intent_model import BBox


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    pixels: np.ndarray  # (H, W, 3) uint8

    def __post_init__(self):
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise ValidationError(
                f"image {self.image_id!r} must be (H, W, 3), "
                f"got {self.pixels.shape}"
            )


@dataclass(frozen=True)
class DetectionBox:
    image_id: str
    concept_name: str
    bbox: BBox
    score: float

    def __post_init__(self):
        if not (0.0 <= self.score <= 1.0):
            raise ValidationError(f"detection score out of range: {self.score}")


class DetectorBackend(Protocol):
    name: str

    def detect(self, image: ImageRecord, concept_names: list[str]) -> list[DetectionBox]: ...


class EmbedderBackend(Protocol):
    name: str
    dim: int

    def embed_image(self, crop: np.ndarray) -> np.ndarray: ...


class InpainterBackend(Protocol):
    name: str

    def inpaint(self, image: np.ndarray, mask: np.ndarray) -> np.ndarray: ...


class ManifestDetector:
    """Fixture-driven detector: boxes are read from a manifest keyed by
    image_id, entries as (concept_name, bbox, score)."""

    name = "manifest-detector"

    def __init__(self, manifest: dict[str, list[tuple[str, BBox, float]]],
                 fail_on: set[str] | None = None):
        self.manifest = manifest
        self.fail_on = fail_on or set()

    def detect(self, image: ImageRecord, concept_names: list[str]) -> list[DetectionBox]:
        if image.image_id in self.fail_on:
            raise DetectorFailure(
                f"detector failed on image {image.image_id!r}",
                {"image_id": image.image_id},
            )
        wanted = set(concept_names)
        return [
            DetectionBox(image.image_id, name, bbox, score)
            for name, bbox, score in self.manifest.get(image.image_id, [])
            if name in wanted
        ]


class CenterBoxDetector:
    """Fallback detector for demos: one centered box per requested concept."""

    name = "center-box-detector"

    def __init__(self, extent: float = 0.5, score: float = 0.9):
        self.extent = extent
        self.score = score

    def detect(self, image: ImageRecord, concept_names: list[str]) -> list[DetectionBox]:
        half = self.extent / 2.0
        bbox = BBox(0.5 - half, 0.5 - half, 0.5 + half, 0.5 + half)
        return [
            DetectionBox(image.image_id, name, bbox, self.score)
            for name in concept_names
        ]


class HashEmbedder:
    """Pixels -> seeded unit vector. Identical crops map to identical
    vectors; distinct textures land near-orthogonal in 256 dimensions."""

    name = "hash-embedder"

    def __init__(self, dim: int = 256):
        self.dim = dim

    def embed_image(self, crop: np.ndarray) -> np.ndarray:
        digest = hashlib.sha256()
        digest.update(str(crop.shape).encode())
        digest.update(np.ascontiguousarray(crop).tobytes())
        seed = int.from_bytes(digest.digest()[:8], "big")
        rng = np.random.default_rng(seed)
        vec = rng.standard_normal(self.dim)
        return vec / np.linalg.norm(vec)


class MeanFillInpainter:
    """Fill masked pixels with the per-channel mean of the masked region;
    pixels outside the mask are untouched (and bit-identical)."""

    name = "mean-fill-inpainter"

    def inpaint(self, image: np.ndarray, mask: np.ndarray) -> np.ndarray:
        out = image.copy()
        if not mask.any():
            return out
        region = image[mask]
        fill = np.round(region.reshape(-1, 3).mean(axis=0)).astype(np.uint8)
        out[mask] = fill
        return out
