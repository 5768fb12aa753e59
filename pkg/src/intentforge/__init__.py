"""intentforge: intent-guided fine-tuning orchestration for text-to-image
models — intent parsing, dataset augmentation, caption optimization,
intent-aligned metrics, training runs, and an HTTP service."""

__version__ = "0.1.0"
