"""Trainer backend interface, training events, and the deterministic
mock trainer used for desk-scale runs and tests.

A real LoRA trainer plugs in behind the same interface; the mock emits
one checkpoint per epoch and generates placeholder images keyed by
(checkpoint step, prompt, seed).
"""

from __future__ import annotations

import hashlib
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Protocol

import numpy as np

from ..augmentation.pipeline import ProcessedDataset
from .presets import TrainingConfig


@dataclass(frozen=True)
class StepCompleted:
    step: int


@dataclass(frozen=True)
class CheckpointSaved:
    step: int
    path: str


@dataclass(frozen=True)
class Finished:
    final_step: int


@dataclass(frozen=True)
class Failed:
    reason: str


TrainerEvent = StepCompleted | CheckpointSaved | Finished | Failed


class TrainerHandle(Protocol):
    def events(self) -> Iterator[TrainerEvent]: ...

    def request_stop(self) -> None: ...


class TrainerBackend(Protocol):
    name: str

    def start(self, dataset: ProcessedDataset, config: TrainingConfig,
              workdir: Path) -> TrainerHandle: ...

    def generate(self, checkpoint_step: int, prompt: str, seed: int) -> np.ndarray: ...


class _MockHandle:
    def __init__(self, trainer: "MockTrainer", dataset: ProcessedDataset,
                 config: TrainingConfig, workdir: Path):
        self._trainer = trainer
        self._dataset = dataset
        self._config = config
        self._workdir = workdir
        self._stop = threading.Event()

    def request_stop(self) -> None:
        self._stop.set()

    def events(self) -> Iterator[TrainerEvent]:
        steps_per_epoch = max(1, len(self._dataset.items) // self._config.batch_size)
        step = 0
        for epoch in range(1, self._config.epochs + 1):
            if self._stop.is_set():
                return
            if self._trainer.epoch_delay > 0:
                time.sleep(self._trainer.epoch_delay)
            if self._stop.is_set():
                return
            step = epoch * steps_per_epoch
            yield StepCompleted(step)
            ckpt_dir = self._workdir / "checkpoints" / str(step)
            ckpt_dir.mkdir(parents=True, exist_ok=True)
            (ckpt_dir / "adapter.txt").write_text(
                f"mock lora adapter, step {step}\n", encoding="utf-8"
            )
            yield CheckpointSaved(step, str(ckpt_dir))
        yield Finished(step)


class MockTrainer:
    """Deterministic stand-in trainer: one checkpoint per epoch, placeholder
    sample images derived purely from (checkpoint step, prompt, seed)."""

    name = "mock-trainer"

    def __init__(self, image_size: int = 64, epoch_delay: float = 0.0):
        self.image_size = image_size
        self.epoch_delay = epoch_delay

    def start(self, dataset: ProcessedDataset, config: TrainingConfig,
              workdir: Path) -> _MockHandle:
        return _MockHandle(self, dataset, config, workdir)

    def generate(self, checkpoint_step: int, prompt: str, seed: int) -> np.ndarray:
        key = f"{checkpoint_step}|{prompt}|{seed}".encode("utf-8")
        digest = hashlib.sha256(key).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
        return rng.integers(
            0, 256, size=(self.image_size, self.image_size, 3), dtype=np.uint8
        )
