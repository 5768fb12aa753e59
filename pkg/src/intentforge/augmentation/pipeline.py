"""The image augmentation pipeline: detect concepts, filter detections
against reference regions, then apply per-operation augmentation and
write out a concept-foldered dataset with caption sidecars.

Pipeline order per image: detect -> filter -> delete (inpaint, producing
the base image) -> keep/modify crops taken from the delete-cleaned image.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from ..captioning import (
    CaptionerBackend,
    CaptionRewriterBackend,
    initial_caption,
    keywords_from_spec,
    optimize_keep,
    optimize_modify,
)
from ..errors import AugmentationFailure, IntentForgeError
from ..intent_model import (
    BBox,
    Granularity,
    IntentSpecification,
    Operation,
    Region,
    spec_to_dict,
)
from .backends import (
    DetectionBox,
    DetectorBackend,
    EmbedderBackend,
    ImageRecord,
    InpainterBackend,
)

logger = logging.getLogger(__name__)

BASE_FOLDER = "base"
DEFAULT_SCORE_THRESHOLD = 0.35
DEFAULT_SIM_THRESHOLD = 0.60
DEFAULT_TRIGGER_THRESHOLD = 0.40
DEFAULT_MASK_PADDING = 0.02
MIN_CROP_PX = 64


@dataclass(frozen=True)
class Thresholds:
    score: float = DEFAULT_SCORE_THRESHOLD
    similarity: float = DEFAULT_SIM_THRESHOLD
    modify_trigger: float = DEFAULT_TRIGGER_THRESHOLD
    mask_padding: float = DEFAULT_MASK_PADDING
    min_crop_px: int = MIN_CROP_PX

    def to_dict(self) -> dict:
        return {
            "score": self.score,
            "similarity": self.similarity,
            "modify_trigger": self.modify_trigger,
            "mask_padding": self.mask_padding,
            "min_crop_px": self.min_crop_px,
        }


@dataclass(frozen=True)
class AugmentBackends:
    detector: DetectorBackend
    embedder: EmbedderBackend
    inpainter: InpainterBackend
    captioner: CaptionerBackend
    rewriter: CaptionRewriterBackend

    def names(self) -> dict[str, str]:
        return {
            "detector": self.detector.name,
            "embedder": self.embedder.name,
            "inpainter": self.inpainter.name,
            "captioner": self.captioner.name,
            "rewriter": self.rewriter.name,
        }


@dataclass(frozen=True)
class CropRecord:
    pixels: np.ndarray
    folder: str
    source_image_id: str
    concept_name: str


@dataclass
class DatasetItem:
    relative_path: str
    pixels: np.ndarray
    caption: str


@dataclass
class ProcessedDataset:
    root_path: str
    items: list[DatasetItem] = field(default_factory=list)
    folders: dict[str, int] = field(default_factory=dict)


def denormalize(bbox: BBox, width: int, height: int) -> tuple[int, int, int, int]:
    """Normalized bbox -> integer pixel rect (x0, y0, x1, y1)."""
    x0 = int(round(bbox.x_min * width))
    y0 = int(round(bbox.y_min * height))
    x1 = int(round(bbox.x_max * width))
    y1 = int(round(bbox.y_max * height))
    return x0, y0, max(x1, x0 + 1), max(y1, y0 + 1)


def crop_pixels(pixels: np.ndarray, bbox: BBox) -> np.ndarray:
    h, w = pixels.shape[:2]
    x0, y0, x1, y1 = denormalize(bbox, w, h)
    return pixels[y0:y1, x0:x1].copy()


def detect_concepts(
    images: list[ImageRecord],
    spec: IntentSpecification,
    detector: DetectorBackend,
    score_threshold: float = DEFAULT_SCORE_THRESHOLD,
) -> list[DetectionBox]:
    """Run detection for every attribute/instance concept; imagery-level
    concepts have no bounding boxes and are skipped."""
    names = [
        c.name for c in spec.concepts
        if c.granularity is not Granularity.IMAGERY
    ]
    boxes: list[DetectionBox] = []
    if not names:
        return boxes
    for image in images:
        boxes.extend(
            b for b in detector.detect(image, names)
            if b.score >= score_threshold
        )
    return boxes


def filter_by_reference(
    boxes: list[DetectionBox],
    regions: list[Region],
    images: list[ImageRecord],
    spec: IntentSpecification,
    embedder: EmbedderBackend,
    sim_threshold: float = DEFAULT_SIM_THRESHOLD,
) -> list[DetectionBox]:
    """Keep a box iff its best cosine similarity against the concept's
    reference crops reaches *sim_threshold*; boxes whose concept carries
    no reference regions pass through unchanged."""
    by_image = {img.image_id: img for img in images}
    regions_by_id = {r.region_id: r for r in regions}

    ref_vectors: dict[str, list[np.ndarray]] = {}
    for concept in spec.concepts:
        vecs = []
        for rid in concept.region_ids:
            region = regions_by_id.get(rid)
            if region is None or region.image_id not in by_image:
                continue
            crop = crop_pixels(by_image[region.image_id].pixels, region.bbox)
            vecs.append(embedder.embed_image(crop))
        if vecs:
            ref_vectors[concept.name] = vecs

    kept: list[DetectionBox] = []
    for box in boxes:
        refs = ref_vectors.get(box.concept_name)
        if not refs:
            kept.append(box)
            continue
        crop = crop_pixels(by_image[box.image_id].pixels, box.bbox)
        vec = embedder.embed_image(crop)
        best = max(float(np.dot(vec, r)) for r in refs)
        if best >= sim_threshold:
            kept.append(box)
    return kept


def _padded_rect(bbox: BBox, width: int, height: int, padding: float):
    x0, y0, x1, y1 = denormalize(bbox, width, height)
    pad_x = int(round(padding * width))
    pad_y = int(round(padding * height))
    return (
        max(0, x0 - pad_x),
        max(0, y0 - pad_y),
        min(width, x1 + pad_x),
        min(height, y1 + pad_y),
    )


def apply_delete(
    pixels: np.ndarray,
    boxes: list[DetectionBox],
    inpainter: InpainterBackend,
    mask_padding: float = DEFAULT_MASK_PADDING,
) -> np.ndarray:
    """Inpaint the union of all delete boxes (each padded, clamped) in one
    pass; the input array is never mutated."""
    if not boxes:
        return pixels.copy()
    h, w = pixels.shape[:2]
    mask = np.zeros((h, w), dtype=bool)
    for box in boxes:
        x0, y0, x1, y1 = _padded_rect(box.bbox, w, h, mask_padding)
        mask[y0:y1, x0:x1] = True
    return inpainter.inpaint(pixels, mask)


def delete_mask(
    pixels: np.ndarray, boxes: list[DetectionBox],
    mask_padding: float = DEFAULT_MASK_PADDING,
) -> np.ndarray:
    """The boolean mask apply_delete would inpaint (for verification)."""
    h, w = pixels.shape[:2]
    mask = np.zeros((h, w), dtype=bool)
    for box in boxes:
        x0, y0, x1, y1 = _padded_rect(box.bbox, w, h, mask_padding)
        mask[y0:y1, x0:x1] = True
    return mask


def apply_keep(
    pixels: np.ndarray, box: DetectionBox, min_crop_px: int = MIN_CROP_PX
) -> CropRecord | None:
    """Crop unconditionally for keep concepts; only degenerate (too small)
    crops are skipped, with a warning."""
    crop = crop_pixels(pixels, box.bbox)
    if crop.shape[0] < min_crop_px or crop.shape[1] < min_crop_px:
        logger.warning(
            "skipping degenerate %sx%s crop for concept %r on image %s",
            crop.shape[1], crop.shape[0], box.concept_name, box.image_id,
        )
        return None
    return CropRecord(crop, box.concept_name, box.image_id, box.concept_name)


def apply_modify(
    pixels: np.ndarray,
    box: DetectionBox,
    trigger_threshold: float = DEFAULT_TRIGGER_THRESHOLD,
    min_crop_px: int = MIN_CROP_PX,
) -> CropRecord | None:
    """Crop iff the box covers strictly less than *trigger_threshold* of
    the image area; concepts already salient are not re-cropped."""
    if box.bbox.area >= trigger_threshold:
        return None
    return apply_keep(pixels, box, min_crop_px=min_crop_px)


def _write_item(root: Path, folder: str, index: int, pixels: np.ndarray,
                caption: str) -> str:
    rel = f"{folder}/{index:04d}"
    folder_path = root / folder
    folder_path.mkdir(parents=True, exist_ok=True)
    Image.fromarray(pixels).save(root / f"{rel}.png")
    (root / f"{rel}.txt").write_text(caption.replace("\n", " "), encoding="utf-8")
    return f"{rel}.png"


def build_dataset(
    images: list[ImageRecord],
    spec: IntentSpecification,
    backends: AugmentBackends,
    root_path: str | Path,
    regions: list[Region] | None = None,
    thresholds: Thresholds = Thresholds(),
    caption_synonyms: dict[str, list[str]] | None = None,
) -> ProcessedDataset:
    """Run the full per-image pipeline and write the foldered dataset.

    Per-image failures are collected; the build fails only if every image
    fails.
    """
    regions = regions or []
    root = Path(root_path)
    root.mkdir(parents=True, exist_ok=True)
    keywords = keywords_from_spec(spec, caption_synonyms)

    concept_by_name = {c.name: c for c in spec.concepts}
    dataset = ProcessedDataset(root_path=str(root))
    counters: dict[str, int] = {}
    failures: list[tuple[str, str]] = []

    def emit(folder: str, pixels: np.ndarray, caption: str) -> None:
        index = counters.get(folder, 0)
        counters[folder] = index + 1
        rel = _write_item(root, folder, index, pixels, caption)
        dataset.items.append(DatasetItem(rel, pixels, caption))
        dataset.folders[folder] = dataset.folders.get(folder, 0) + 1

    for image in sorted(images, key=lambda i: i.image_id):
        try:
            # detect and filter per image so one backend failure only
            # loses that image
            boxes = detect_concepts(
                [image], spec, backends.detector, thresholds.score
            )
            boxes = filter_by_reference(
                boxes, regions, images, spec, backends.embedder,
                thresholds.similarity,
            )
            delete_boxes = [
                b for b in boxes
                if concept_by_name[b.concept_name].operation is Operation.DELETE
            ]
            base = apply_delete(
                image.pixels, delete_boxes, backends.inpainter,
                thresholds.mask_padding,
            )

            caption = initial_caption(
                base, spec.trigger_word, backends.captioner, keywords
            )
            for concept in spec.by_operation(Operation.KEEP):
                caption = optimize_keep(
                    caption, concept, backends.rewriter, keywords
                )
            for box in boxes:
                concept = concept_by_name[box.concept_name]
                if concept.operation is Operation.MODIFY:
                    caption = optimize_modify(
                        caption, base, box, concept,
                        backends.captioner, backends.rewriter, keywords,
                    )
            emit(BASE_FOLDER, base, caption.text)

            for box in boxes:
                concept = concept_by_name[box.concept_name]
                if concept.operation is Operation.KEEP:
                    record = apply_keep(base, box, thresholds.min_crop_px)
                elif concept.operation is Operation.MODIFY:
                    record = apply_modify(
                        base, box, thresholds.modify_trigger,
                        thresholds.min_crop_px,
                    )
                else:
                    record = None
                if record is None:
                    continue
                crop_caption = initial_caption(
                    record.pixels, spec.trigger_word, backends.captioner,
                    keywords,
                )
                emit(record.folder, record.pixels, crop_caption.text)
        except IntentForgeError as exc:
            logger.warning("image %s failed: %s", image.image_id, exc)
            failures.append((image.image_id, exc.message))

    if failures and len(failures) == len(images):
        raise AugmentationFailure(
            "every image failed during augmentation",
            {"failures": failures},
        )

    manifest = {
        "spec": spec_to_dict(spec),
        "thresholds": thresholds.to_dict(),
        "backends": backends.names(),
        "folders": dataset.folders,
        "failures": failures,
    }
    (root / "manifest.json").write_text(
        json.dumps(manifest, indent=2, ensure_ascii=False), encoding="utf-8"
    )
    return dataset


def load_dataset(root_path: str | Path) -> ProcessedDataset:
    """Reload a dataset previously written by build_dataset."""
    root = Path(root_path)
    manifest = json.loads((root / "manifest.json").read_text(encoding="utf-8"))
    dataset = ProcessedDataset(root_path=str(root), folders=dict(manifest["folders"]))
    for folder in sorted(dataset.folders):
        for png in sorted((root / folder).glob("*.png")):
            caption = png.with_suffix(".txt").read_text(encoding="utf-8")
            pixels = np.asarray(Image.open(png).convert("RGB"))
            dataset.items.append(
                DatasetItem(f"{folder}/{png.name}", pixels, caption)
            )
    return dataset
