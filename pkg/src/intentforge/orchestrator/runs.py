"""Training run lifecycle: start/stop, per-checkpoint sampling and metric
computation, and the queryable model library built from checkpoints.

Each run owns a directory:
    <runs>/<run_id>/manifest.json
    <runs>/<run_id>/checkpoints/<step>/
    <runs>/<run_id>/samples/<step>/<prompt_hash>/<i>.png
    <runs>/<run_id>/metrics/<name>.jsonl
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import threading
import uuid
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from PIL import Image

from ..augmentation.pipeline import BASE_FOLDER, ProcessedDataset, load_dataset
from ..errors import (
    DatasetEmpty,
    InvalidState,
    TrainerStartFailure,
    UnknownCheckpoint,
    UnknownRun,
)
from ..intent_model import (
    IntentSpecification,
    Operation,
    spec_from_dict,
    spec_to_dict,
)
from ..metrics import (
    KeywordPair,
    MetricSeries,
    ReferenceSet,
    SampleBatch,
    SimilarityScorer,
    append_point,
    append_series_line,
    controllability,
    rank_scores,
    read_series_file,
    stability,
)
from ..transformer import PromptPlan
from .presets import TrainingConfig
from .trainer import CheckpointSaved, Failed, Finished, TrainerBackend

logger = logging.getLogger(__name__)


class RunStatus(str, Enum):
    PENDING = "pending"
    TRAINING = "training"
    STOPPED = "stopped"
    FINISHED = "finished"
    FAILED = "failed"


@dataclass
class Checkpoint:
    checkpoint_id: str
    run_id: str
    step: int
    path: str
    cover_image_path: str
    intent_scores: list[tuple[str, float]]


@dataclass(frozen=True)
class MetricSpec:
    """One metric to evaluate per checkpoint."""

    kind: str  # "stability" | "controllability"
    metric_name: str
    concept_name: str
    prompt: str
    keyword_pair: KeywordPair | None = None


@dataclass
class RunState:
    run_id: str
    root: Path
    config: TrainingConfig
    spec: IntentSpecification
    prompt_plan: PromptPlan
    status: RunStatus = RunStatus.PENDING
    checkpoints: list[Checkpoint] = field(default_factory=list)
    series: dict[str, MetricSeries] = field(default_factory=dict)
    error: str | None = None
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)
    _thread: threading.Thread | None = field(default=None, repr=False)
    _handle: object = field(default=None, repr=False)

    def wait(self, timeout: float | None = None) -> None:
        if self._thread is not None:
            self._thread.join(timeout)


def _write_status(run: RunState) -> None:
    """Persist the run's status so other processes can pick the run up."""
    (run.root / "status.json").write_text(
        json.dumps({"status": run.status.value, "error": run.error}),
        encoding="utf-8",
    )


def _sanitize(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name)


def _prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:12]


def build_metric_plan(
    spec: IntentSpecification,
    prompt_plan: PromptPlan,
    dataset: ProcessedDataset,
) -> list[MetricSpec]:
    """Derive the per-checkpoint metric set from the spec and dataset.

    Stability is tracked for the trigger word overall (against base images)
    and for every keep/modify concept that yielded reference crops;
    controllability for every modify concept with an opposing-keyword pair.
    """
    trigger = spec.trigger_word
    plan: list[MetricSpec] = [
        MetricSpec(
            kind="stability",
            metric_name="stability:overall",
            concept_name=trigger,
            prompt=trigger,
        )
    ]
    for concept in spec.concepts:
        if concept.operation not in (Operation.KEEP, Operation.MODIFY):
            continue
        prompt = f"{trigger}, {concept.name}"
        if dataset.folders.get(concept.name, 0) > 0:
            plan.append(
                MetricSpec(
                    kind="stability",
                    metric_name=f"stability:{concept.name}",
                    concept_name=concept.name,
                    prompt=prompt,
                )
            )
        if concept.operation is Operation.MODIFY:
            pair = prompt_plan.controllability_pairs.get(concept.name)
            if pair is not None:
                plan.append(
                    MetricSpec(
                        kind="controllability",
                        metric_name=f"controllability:{concept.name}",
                        concept_name=concept.name,
                        prompt=prompt,
                        keyword_pair=KeywordPair(pair[0], pair[1], concept.name),
                    )
                )
    return plan


def _reference_sets(dataset: ProcessedDataset, spec: IntentSpecification) -> dict[str, ReferenceSet]:
    by_folder: dict[str, list[np.ndarray]] = {}
    for item in dataset.items:
        folder = item.relative_path.split("/", 1)[0]
        by_folder.setdefault(folder, []).append(item.pixels)
    refs: dict[str, ReferenceSet] = {}
    if by_folder.get(BASE_FOLDER):
        refs[spec.trigger_word] = ReferenceSet(
            by_folder[BASE_FOLDER], spec.trigger_word
        )
    for concept in spec.concepts:
        if by_folder.get(concept.name):
            refs[concept.name] = ReferenceSet(by_folder[concept.name], concept.name)
    return refs


class RunRegistry:
    """Shared run store: exclusive writes, concurrent reads, one background
    training task per run."""

    def __init__(self, runs_root: str | Path, trainer: TrainerBackend,
                 scorer: SimilarityScorer):
        self.runs_root = Path(runs_root)
        self.trainer = trainer
        self.scorer = scorer
        self._runs: dict[str, RunState] = {}
        self._datasets: dict[str, ProcessedDataset] = {}
        self._refs: dict[str, dict[str, ReferenceSet]] = {}
        self._plans: dict[str, list[MetricSpec]] = {}
        self._lock = threading.Lock()

    # --- lifecycle ---

    def start_run(
        self,
        dataset: ProcessedDataset,
        spec: IntentSpecification,
        config: TrainingConfig,
        prompt_plan: PromptPlan,
        run_id: str | None = None,
    ) -> RunState:
        if not dataset.items:
            raise DatasetEmpty("cannot train on an empty dataset")
        run_id = run_id or uuid.uuid4().hex[:12]
        with self._lock:
            if run_id in self._runs:
                raise InvalidState(
                    f"run {run_id!r} already started; runs are single-start",
                    {"run_id": run_id},
                )
            root = self.runs_root / run_id
            root.mkdir(parents=True, exist_ok=False)
            run = RunState(
                run_id=run_id, root=root, config=config, spec=spec,
                prompt_plan=prompt_plan,
            )
            self._runs[run_id] = run
            self._datasets[run_id] = dataset
            self._refs[run_id] = _reference_sets(dataset, spec)
            self._plans[run_id] = build_metric_plan(spec, prompt_plan, dataset)

        manifest = {
            "run_id": run_id,
            "config": config.to_dict(),
            "spec": spec_to_dict(spec),
            "prompt_plan": prompt_plan.to_dict(),
            "trainer": self.trainer.name,
            "scorer": self.scorer.name,
            "dataset_root": dataset.root_path,
        }
        (root / "manifest.json").write_text(
            json.dumps(manifest, indent=2, ensure_ascii=False), encoding="utf-8"
        )

        try:
            handle = self.trainer.start(dataset, config, root)
        except Exception as exc:  # backend boundary
            run.status = RunStatus.FAILED
            run.error = str(exc)
            raise TrainerStartFailure(f"trainer failed to start: {exc}") from exc

        run._handle = handle
        run.status = RunStatus.TRAINING
        _write_status(run)
        thread = threading.Thread(
            target=self._consume_events, args=(run, handle), daemon=True
        )
        run._thread = thread
        thread.start()
        return run

    def _consume_events(self, run: RunState, handle) -> None:
        try:
            for event in handle.events():
                if isinstance(event, CheckpointSaved):
                    self.on_checkpoint(run, event)
                elif isinstance(event, Finished):
                    with run._lock:
                        if run.status is RunStatus.TRAINING:
                            run.status = RunStatus.FINISHED
                    _write_status(run)
                elif isinstance(event, Failed):
                    with run._lock:
                        run.status = RunStatus.FAILED
                        run.error = event.reason
                    _write_status(run)
        except Exception as exc:  # trainer boundary: never crash the registry
            logger.exception("run %s crashed", run.run_id)
            with run._lock:
                run.status = RunStatus.FAILED
                run.error = str(exc)
            _write_status(run)

    def stop_run(self, run_id: str) -> RunState:
        run = self.get(run_id)
        with run._lock:
            if run.status is not RunStatus.TRAINING:
                raise InvalidState(
                    f"run {run_id!r} is {run.status.value}, not training",
                    {"run_id": run_id, "status": run.status.value},
                )
            run._handle.request_stop()
            run.status = RunStatus.STOPPED
        _write_status(run)
        run.wait(timeout=30)
        return run

    def get(self, run_id: str) -> RunState:
        with self._lock:
            run = self._runs.get(run_id)
        if run is None:
            run = self._hydrate(run_id)
        return run

    def _hydrate(self, run_id: str) -> RunState:
        """Rebuild a run's state from its on-disk directory.

        Lets a fresh registry (e.g. a new CLI process) inspect, evaluate and
        sample from runs it did not start. Training cannot resume in the new
        process, so a run recorded as still training is surfaced as stopped.
        """
        root = self.runs_root / run_id
        manifest_path = root / "manifest.json"
        if not manifest_path.exists():
            raise UnknownRun(f"no run {run_id!r}", {"run_id": run_id})
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        config = TrainingConfig.from_dict(manifest["config"])
        spec = spec_from_dict(manifest["spec"])
        prompt_plan = PromptPlan.from_dict(manifest["prompt_plan"])
        dataset = load_dataset(manifest["dataset_root"])

        status, error = RunStatus.STOPPED, None
        status_path = root / "status.json"
        if status_path.exists():
            data = json.loads(status_path.read_text(encoding="utf-8"))
            status = RunStatus(data["status"])
            error = data.get("error")
        if status in (RunStatus.PENDING, RunStatus.TRAINING):
            status = RunStatus.STOPPED

        run = RunState(
            run_id=run_id, root=root, config=config, spec=spec,
            prompt_plan=prompt_plan, status=status, error=error,
        )

        metrics_dir = root / "metrics"
        if metrics_dir.exists():
            for path in sorted(metrics_dir.glob("*.jsonl")):
                for line in read_series_file(path):
                    series = run.series.setdefault(
                        line["metric_name"],
                        MetricSeries(line["metric_name"], line["concept_name"]),
                    )
                    append_point(series, line["step"], line["value"])

        ckpt_root = root / "checkpoints"
        steps = sorted(
            int(p.name) for p in ckpt_root.iterdir() if p.name.isdigit()
        ) if ckpt_root.exists() else []
        first_prompt = prompt_plan.monitoring_prompts[0]
        for step in steps:
            scores = [
                (name, value)
                for name, series in run.series.items()
                for point_step, value in series.points
                if point_step == step
            ]
            cover = (
                root / "samples" / str(step) / _prompt_hash(first_prompt)
                / "0.png"
            )
            run.checkpoints.append(
                Checkpoint(
                    checkpoint_id=f"{run_id}:{step}",
                    run_id=run_id,
                    step=step,
                    path=str(ckpt_root / str(step)),
                    cover_image_path=str(cover),
                    intent_scores=rank_scores(scores),
                )
            )

        with self._lock:
            existing = self._runs.get(run_id)
            if existing is not None:
                return existing
            self._runs[run_id] = run
            self._datasets[run_id] = dataset
            self._refs[run_id] = _reference_sets(dataset, spec)
            self._plans[run_id] = build_metric_plan(spec, prompt_plan, dataset)
        return run

    def reference_concepts(self, run_id: str) -> set[str]:
        self.get(run_id)
        return set(self._refs[run_id])

    def list_runs(self) -> list[RunState]:
        with self._lock:
            return list(self._runs.values())

    # --- sampling and metrics ---

    def _generate_batch(self, run: RunState, step: int, prompt: str,
                        batch_size: int | None = None,
                        save: bool = True) -> SampleBatch:
        m = batch_size or run.config.batch_size
        images = [
            self.trainer.generate(step, prompt, run.config.seed + i)
            for i in range(m)
        ]
        if save:
            sample_dir = run.root / "samples" / str(step) / _prompt_hash(prompt)
            sample_dir.mkdir(parents=True, exist_ok=True)
            for i, image in enumerate(images):
                Image.fromarray(image).save(sample_dir / f"{i}.png")
        return SampleBatch(images=images, prompt=prompt, step=step,
                           checkpoint_id=f"{run.run_id}:{step}")

    def _compute_metric(self, run: RunState, metric: MetricSpec,
                        batch: SampleBatch) -> float:
        if metric.kind == "stability":
            refs = self._refs[run.run_id][metric.concept_name]
            return stability(batch, refs, self.scorer)
        return controllability(batch, metric.keyword_pair, self.scorer)

    def on_checkpoint(self, run: RunState, event: CheckpointSaved) -> RunState:
        step = event.step
        batches: dict[str, SampleBatch] = {}
        for prompt in run.prompt_plan.monitoring_prompts:
            batches[prompt] = self._generate_batch(run, step, prompt)

        first_prompt = run.prompt_plan.monitoring_prompts[0]
        cover_path = (
            run.root / "samples" / str(step) / _prompt_hash(first_prompt) / "0.png"
        )

        scores: list[tuple[str, float]] = []
        for metric in self._plans[run.run_id]:
            batch = batches.get(metric.prompt) or batches[first_prompt]
            try:
                value = self._compute_metric(run, metric, batch)
            except Exception as exc:  # fault isolation: metric never kills the run
                logger.warning(
                    "metric %s failed at step %d: %s",
                    metric.metric_name, step, exc,
                )
                continue
            scores.append((metric.metric_name, value))
            with run._lock:
                series = run.series.setdefault(
                    metric.metric_name,
                    MetricSeries(metric.metric_name, metric.concept_name),
                )
                append_point(series, step, value)
            append_series_line(
                run.root / "metrics" / f"{_sanitize(metric.metric_name)}.jsonl",
                step, value, metric.metric_name, metric.concept_name,
                metric.prompt,
            )

        checkpoint = Checkpoint(
            checkpoint_id=f"{run.run_id}:{step}",
            run_id=run.run_id,
            step=step,
            path=event.path,
            cover_image_path=str(cover_path),
            intent_scores=rank_scores(scores),
        )
        with run._lock:
            run.checkpoints.append(checkpoint)
        return run

    # --- model library / evaluation ---

    def get_checkpoint(self, run_id: str, step: int) -> Checkpoint:
        run = self.get(run_id)
        with run._lock:
            for checkpoint in run.checkpoints:
                if checkpoint.step == step:
                    return checkpoint
        raise UnknownCheckpoint(
            f"run {run_id!r} has no checkpoint at step {step}",
            {"run_id": run_id, "step": step},
        )

    def evaluate_checkpoint(
        self,
        run_id: str,
        step: int,
        prompt: str | None = None,
        metric_overrides: list[MetricSpec] | None = None,
        batch_size: int | None = None,
    ) -> tuple[list[np.ndarray], list[tuple[str, float]]]:
        """Fresh sample batch plus ranked intent scores for one checkpoint.

        *metric_overrides* replaces the run's metric plan when given (an
        empty list means images only).
        """
        run = self.get(run_id)
        self.get_checkpoint(run_id, step)
        prompt = prompt or run.prompt_plan.monitoring_prompts[0]
        batch = self._generate_batch(run, step, prompt, batch_size, save=False)
        plan = (
            metric_overrides if metric_overrides is not None
            else self._plans[run.run_id]
        )
        scores: list[tuple[str, float]] = []
        for metric in plan:
            try:
                scores.append(
                    (metric.metric_name, self._compute_metric(run, metric, batch))
                )
            except Exception as exc:
                logger.warning("metric %s failed: %s", metric.metric_name, exc)
        return batch.images, rank_scores(scores)

    def generate(self, run_id: str, step: int, prompt: str, seed: int) -> np.ndarray:
        self.get_checkpoint(run_id, step)
        return self.trainer.generate(step, prompt, seed)
