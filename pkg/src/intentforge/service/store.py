"""Filesystem-backed project store and the service-level operations the
HTTP endpoints and CLI both call.

Layout under the data root:
    projects/<project_id>/project.json
    projects/<project_id>/raw/<image_id>.png
    projects/<project_id>/regions.json
    projects/<project_id>/spec.json
    projects/<project_id>/dataset/...
    runs/<run_id>/...
"""

from __future__ import annotations

import base64
import io
import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from ..augmentation import (
    AugmentBackends,
    HashEmbedder,
    ImageRecord,
    ManifestDetector,
    MeanFillInpainter,
    ProcessedDataset,
    Thresholds,
    build_dataset,
    load_dataset,
)
from ..augmentation.backends import CenterBoxDetector
from ..captioning import (
    RuleRewriter,
    StubCaptioner,
    compute_highlights,
    keywords_from_spec,
    propagate_edit,
)
from ..errors import (
    DatasetEmpty,
    DuplicateName,
    IntentForgeError,
    UnknownProject,
    UnsupportedFormat,
    ValidationError,
)
from ..intent_model import (
    BBox,
    IntentSpecification,
    Region,
    parse_annotated_text,
    spec_from_dict,
    spec_to_dict,
    validate_specification,
)
from ..metrics import HashScorer
from ..orchestrator import (
    MockTrainer,
    RunRegistry,
    config_with_overrides,
    preset_hyperparameters,
)
from ..orchestrator.presets import TrainingConfig
from ..transformer import (
    LLMBackend,
    PromptPlan,
    RuleBackend,
    recommend_prompts,
    transform_intent,
)


@dataclass
class ServiceBackends:
    augment: AugmentBackends
    trainer: object
    scorer: object
    transformers: dict[str, object]

    @classmethod
    def default(cls) -> "ServiceBackends":
        transformers: dict[str, object] = {"rule": RuleBackend()}
        import os

        base_url = os.environ.get("INTENTFORGE_LLM_URL")
        if base_url:
            transformers["llm"] = LLMBackend(
                base_url, os.environ.get("INTENTFORGE_LLM_MODEL", "default")
            )
        return cls(
            augment=AugmentBackends(
                detector=CenterBoxDetector(),
                embedder=HashEmbedder(),
                inpainter=MeanFillInpainter(),
                captioner=StubCaptioner(),
                rewriter=RuleRewriter(),
            ),
            trainer=MockTrainer(),
            scorer=HashScorer(),
            transformers=transformers,
        )


@dataclass
class Project:
    project_id: str
    name: str
    image_ids: list[str] = field(default_factory=list)
    run_ids: list[str] = field(default_factory=list)
    has_spec: bool = False
    has_dataset: bool = False

    def to_dict(self) -> dict:
        return {
            "project_id": self.project_id,
            "name": self.name,
            "image_ids": self.image_ids,
            "run_ids": self.run_ids,
            "has_spec": self.has_spec,
            "has_dataset": self.has_dataset,
        }


class ProjectStore:
    def __init__(self, data_root: str | Path,
                 backends: ServiceBackends | None = None):
        self.data_root = Path(data_root)
        self.backends = backends or ServiceBackends.default()
        (self.data_root / "projects").mkdir(parents=True, exist_ok=True)
        self.registry = RunRegistry(
            self.data_root / "runs", self.backends.trainer, self.backends.scorer
        )
        self._projects: dict[str, Project] = {}
        self._datasets: dict[str, ProcessedDataset] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._store_lock = threading.Lock()
        self._load_existing()

    # --- persistence helpers ---

    def _project_dir(self, project_id: str) -> Path:
        return self.data_root / "projects" / project_id

    def _save(self, project: Project) -> None:
        path = self._project_dir(project.project_id) / "project.json"
        path.write_text(
            json.dumps(project.to_dict(), indent=2), encoding="utf-8"
        )

    def _load_existing(self) -> None:
        for manifest in (self.data_root / "projects").glob("*/project.json"):
            data = json.loads(manifest.read_text(encoding="utf-8"))
            project = Project(
                project_id=data["project_id"],
                name=data["name"],
                image_ids=data.get("image_ids", []),
                run_ids=data.get("run_ids", []),
                has_spec=data.get("has_spec", False),
                has_dataset=data.get("has_dataset", False),
            )
            self._projects[project.project_id] = project
            self._locks[project.project_id] = threading.Lock()

    def _lock(self, project_id: str) -> threading.Lock:
        with self._store_lock:
            return self._locks[project_id]

    # --- projects ---

    def create_project(self, name: str) -> Project:
        if not name.strip():
            raise ValidationError("project name must be non-empty")
        with self._store_lock:
            if any(p.name == name for p in self._projects.values()):
                raise DuplicateName(
                    f"a project named {name!r} already exists", {"name": name}
                )
            project = Project(project_id=uuid.uuid4().hex[:12], name=name)
            self._projects[project.project_id] = project
            self._locks[project.project_id] = threading.Lock()
        (self._project_dir(project.project_id) / "raw").mkdir(parents=True)
        self._save(project)
        return project

    def get_project(self, project_id: str) -> Project:
        with self._store_lock:
            project = self._projects.get(project_id)
        if project is None:
            raise UnknownProject(
                f"no project {project_id!r}", {"project_id": project_id}
            )
        return project

    def list_projects(self) -> list[Project]:
        with self._store_lock:
            return list(self._projects.values())

    # --- images ---

    def upload_images(self, project_id: str,
                      files: list[tuple[str, bytes]]) -> list[str]:
        project = self.get_project(project_id)
        with self._lock(project_id):
            new_ids = []
            counter = len(project.image_ids)
            for filename, payload in files:
                try:
                    image = Image.open(io.BytesIO(payload)).convert("RGB")
                except (UnidentifiedImageError, OSError) as exc:
                    raise UnsupportedFormat(
                        f"file {filename!r} is not a decodable raster image",
                        {"filename": filename},
                    ) from exc
                image_id = f"img{counter:04d}"
                counter += 1
                image.save(self._project_dir(project_id) / "raw" / f"{image_id}.png")
                new_ids.append(image_id)
            project.image_ids.extend(new_ids)
            self._save(project)
        return new_ids

    def image_path(self, project_id: str, image_id: str) -> Path:
        self.get_project(project_id)
        path = self._project_dir(project_id) / "raw" / f"{image_id}.png"
        if not path.exists():
            raise UnknownProject(
                f"no image {image_id!r} in project {project_id!r}",
                {"image_id": image_id},
            )
        return path

    def _load_images(self, project: Project) -> list[ImageRecord]:
        records = []
        for image_id in project.image_ids:
            path = self._project_dir(project.project_id) / "raw" / f"{image_id}.png"
            pixels = np.asarray(Image.open(path).convert("RGB"))
            records.append(ImageRecord(image_id, pixels))
        return records

    # --- intent ---

    def submit_intent(self, project_id: str, text: str,
                      regions: list[Region], backend_name: str = "rule") -> dict:
        project = self.get_project(project_id)
        if not project.image_ids:
            raise ValidationError(
                "upload training images before submitting intent"
            )
        backend = self.backends.transformers.get(backend_name)
        if backend is None:
            raise ValidationError(
                f"unknown transformer backend {backend_name!r}; "
                f"available: {sorted(self.backends.transformers)}"
            )
        if getattr(backend, "structured", False) and text.lstrip().startswith("{"):
            # structured backends consume canonical spec JSON directly;
            # bracket parsing only applies to free-text input
            from ..intent_model import AnnotatedIntentInput

            parsed = AnnotatedIntentInput(text=text, regions=tuple(regions))
        else:
            parsed = parse_annotated_text(text, regions)
        spec = transform_intent(parsed, backend)
        with self._lock(project_id):
            self._write_spec(project, spec)
            self._write_regions(project, regions)
        return spec_to_dict(spec)

    def _write_spec(self, project: Project, spec: IntentSpecification) -> None:
        path = self._project_dir(project.project_id) / "spec.json"
        path.write_text(
            json.dumps(spec_to_dict(spec), indent=2, ensure_ascii=False),
            encoding="utf-8",
        )
        project.has_spec = True
        self._save(project)

    def _write_regions(self, project: Project, regions: list[Region]) -> None:
        path = self._project_dir(project.project_id) / "regions.json"
        path.write_text(
            json.dumps(
                [
                    {
                        "region_id": r.region_id,
                        "image_id": r.image_id,
                        "bbox": r.bbox.to_list(),
                        "color_index": r.color_index,
                    }
                    for r in regions
                ],
                indent=2,
            ),
            encoding="utf-8",
        )

    def get_spec(self, project_id: str) -> dict:
        project = self.get_project(project_id)
        if not project.has_spec:
            raise ValidationError("project has no intent specification yet")
        path = self._project_dir(project_id) / "spec.json"
        return json.loads(path.read_text(encoding="utf-8"))

    def _load_spec(self, project_id: str) -> IntentSpecification:
        return spec_from_dict(self.get_spec(project_id))

    def _load_regions(self, project_id: str) -> list[Region]:
        path = self._project_dir(project_id) / "regions.json"
        if not path.exists():
            return []
        return [
            Region(
                region_id=entry["region_id"],
                image_id=entry["image_id"],
                bbox=BBox.from_list(entry["bbox"]),
                color_index=entry.get("color_index", 0),
            )
            for entry in json.loads(path.read_text(encoding="utf-8"))
        ]

    def update_spec(self, project_id: str, document: dict) -> dict:
        project = self.get_project(project_id)
        spec = spec_from_dict(document)
        known_ids = {r.region_id for r in self._load_regions(project_id)}
        validate_specification(spec, known_region_ids=known_ids or None)
        with self._lock(project_id):
            self._write_spec(project, spec)
        return spec_to_dict(spec)

    # --- preprocessing / captions ---

    def preprocess(self, project_id: str,
                   caption_synonyms: dict[str, list[str]] | None = None,
                   thresholds: Thresholds = Thresholds()) -> dict:
        project = self.get_project(project_id)
        spec = self._load_spec(project_id)
        with self._lock(project_id):
            images = self._load_images(project)
            regions = self._load_regions(project_id)
            root = self._project_dir(project_id) / "dataset"
            if root.exists():
                import shutil

                shutil.rmtree(root)
            dataset = build_dataset(
                images, spec, self.backends.augment, root,
                regions=regions, thresholds=thresholds,
                caption_synonyms=caption_synonyms,
            )
            self._datasets[project_id] = dataset
            project.has_dataset = True
            self._save(project)
        return {"folders": dataset.folders}

    def _dataset(self, project_id: str) -> ProcessedDataset:
        project = self.get_project(project_id)
        if not project.has_dataset:
            raise DatasetEmpty(
                "project has no processed dataset; run preprocess first"
            )
        dataset = self._datasets.get(project_id)
        if dataset is None:
            dataset = load_dataset(self._project_dir(project_id) / "dataset")
            self._datasets[project_id] = dataset
        return dataset

    def get_captions(self, project_id: str) -> list[dict]:
        dataset = self._dataset(project_id)
        spec = self._load_spec(project_id)
        keywords = keywords_from_spec(spec)
        return [
            {
                "path": item.relative_path,
                "caption": item.caption,
                "highlights": [
                    {"start": s, "end": e, "concept": concept}
                    for (s, e), concept in compute_highlights(item.caption, keywords)
                ],
            }
            for item in dataset.items
        ]

    def put_caption(self, project_id: str, path: str, caption: str) -> dict:
        dataset = self._dataset(project_id)
        with self._lock(project_id):
            for item in dataset.items:
                if item.relative_path == path:
                    sidecar = (
                        Path(dataset.root_path) / Path(path).with_suffix(".txt")
                    )
                    sidecar.with_suffix(".txt.bak").write_text(
                        item.caption, encoding="utf-8"
                    )
                    sidecar.write_text(caption, encoding="utf-8")
                    item.caption = caption
                    return {"path": path, "caption": caption}
        raise ValidationError(f"no dataset item at {path!r}", {"path": path})

    def propagate_caption_edit(self, project_id: str, find: str,
                               replace: str, scope: str = "all") -> int:
        dataset = self._dataset(project_id)
        with self._lock(project_id):
            return propagate_edit(dataset, find, replace, scope)

    def dataset_file(self, project_id: str, relative_path: str) -> Path:
        dataset = self._dataset(project_id)
        path = (Path(dataset.root_path) / relative_path).resolve()
        if not str(path).startswith(str(Path(dataset.root_path).resolve())):
            raise ValidationError("path escapes the dataset root")
        if not path.exists():
            raise ValidationError(f"no dataset file {relative_path!r}")
        return path

    # --- training ---

    def start_training(self, project_id: str,
                       overrides: dict | None = None,
                       opposing_keywords: dict[str, list[str]] | None = None) -> dict:
        project = self.get_project(project_id)
        dataset = self._dataset(project_id)
        spec = self._load_spec(project_id)
        overrides = dict(overrides or {})

        try:
            config = preset_hyperparameters(spec.domain)
        except IntentForgeError:
            required = {"unet_lr", "text_encoder_lr", "lora_dimension",
                        "lora_alpha"}
            if not required <= set(k for k, v in overrides.items() if v is not None):
                raise
            config = TrainingConfig()
        config = config_with_overrides(
            config, trigger_word=spec.trigger_word, domain=spec.domain,
            **{k: v for k, v in overrides.items() if v is not None},
        )
        pairs = {
            name: (kw[0], kw[1])
            for name, kw in (opposing_keywords or {}).items()
        }
        plan = recommend_prompts(spec, pairs or None)
        run = self.registry.start_run(dataset, spec, config, plan)
        with self._lock(project_id):
            project.run_ids.append(run.run_id)
            self._save(project)
        return {"run_id": run.run_id, "status": run.status.value}

    def run_status(self, run_id: str) -> dict:
        run = self.registry.get(run_id)
        with run._lock:
            return {
                "run_id": run.run_id,
                "status": run.status.value,
                "error": run.error,
                "checkpoint_steps": [c.step for c in run.checkpoints],
                "config": run.config.to_dict(),
            }

    def metric_events(self, run_id: str, after_step: int = 0) -> dict:
        run = self.registry.get(run_id)
        with run._lock:
            events = []
            for series in run.series.values():
                for step, value in series.points:
                    if step > after_step:
                        events.append(
                            {
                                "step": step,
                                "metric_name": series.metric_name,
                                "concept_name": series.concept_name,
                                "value": value,
                            }
                        )
            events.sort(key=lambda e: (e["step"], e["metric_name"]))
            checkpoints = [
                {
                    "step": c.step,
                    "cover_url": f"/runs/{run_id}/checkpoints/{c.step}/cover.png",
                }
                for c in run.checkpoints if c.step > after_step
            ]
            return {
                "run_id": run_id,
                "status": run.status.value,
                "events": events,
                "checkpoints": checkpoints,
            }

    def list_models(self, project_id: str) -> list[dict]:
        project = self.get_project(project_id)
        models = []
        for run_id in project.run_ids:
            run = self.registry.get(run_id)
            with run._lock:
                for c in run.checkpoints:
                    models.append(
                        {
                            "run_id": run_id,
                            "checkpoint_id": c.checkpoint_id,
                            "step": c.step,
                            "cover_url": (
                                f"/runs/{run_id}/checkpoints/{c.step}/cover.png"
                            ),
                            "intent_scores": [
                                {"metric_name": n, "value": v}
                                for n, v in c.intent_scores
                            ],
                        }
                    )
        return models

    def cover_path(self, run_id: str, step: int) -> Path:
        checkpoint = self.registry.get_checkpoint(run_id, step)
        return Path(checkpoint.cover_image_path)

    @staticmethod
    def encode_image(pixels: np.ndarray) -> str:
        buffer = io.BytesIO()
        Image.fromarray(pixels).save(buffer, format="PNG")
        return base64.b64encode(buffer.getvalue()).decode("ascii")
