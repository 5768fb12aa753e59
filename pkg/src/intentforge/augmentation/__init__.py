from .backends import (
    DetectionBox,
    DetectorBackend,
    EmbedderBackend,
    HashEmbedder,
    ImageRecord,
    InpainterBackend,
    ManifestDetector,
    MeanFillInpainter,
)
from .pipeline import (
    AugmentBackends,
    CropRecord,
    DatasetItem,
    ProcessedDataset,
    Thresholds,
    apply_delete,
    apply_keep,
    apply_modify,
    build_dataset,
    detect_concepts,
    filter_by_reference,
    load_dataset,
)

__all__ = [
    "AugmentBackends",
    "CropRecord",
    "DatasetItem",
    "DetectionBox",
    "DetectorBackend",
    "EmbedderBackend",
    "HashEmbedder",
    "ImageRecord",
    "InpainterBackend",
    "ManifestDetector",
    "MeanFillInpainter",
    "ProcessedDataset",
    "Thresholds",
    "apply_delete",
    "apply_keep",
    "apply_modify",
    "build_dataset",
    "detect_concepts",
    "filter_by_reference",
    "load_dataset",
]
