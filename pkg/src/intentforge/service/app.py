"""HTTP surface over the project store: the full upload -> intent ->
preprocess -> train -> monitor -> evaluate -> generate workflow.

Errors always arrive as ``{code, message, detail}`` bodies; request
schemas are strict (unknown fields rejected).
"""

from __future__ import annotations

import base64
import binascii
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import FileResponse, JSONResponse

from ..errors import (
    DatasetEmpty,
    DuplicateName,
    IntentForgeError,
    InvalidState,
    MissingOpposingKeywords,
    TransformFailure,
    UnknownCheckpoint,
    UnknownProject,
    UnknownRun,
    UnsupportedFormat,
    ValidationError,
)
from ..intent_model import BBox, Region
from ..metrics import KeywordPair
from ..orchestrator import MetricSpec
from .schemas import (
    CreateProjectRequest,
    EvaluateRequest,
    GenerateRequest,
    PreprocessRequest,
    PropagateEditRequest,
    PutCaptionRequest,
    SpecPayload,
    SubmitIntentRequest,
    TrainRequest,
    UploadImagesRequest,
)
from .store import ProjectStore, ServiceBackends

_STATUS_BY_ERROR: list[tuple[type, int]] = [
    (UnknownProject, 404),
    (UnknownRun, 404),
    (UnknownCheckpoint, 404),
    (DuplicateName, 409),
    (InvalidState, 409),
    (DatasetEmpty, 409),
    (UnsupportedFormat, 415),
    (TransformFailure, 502),
    (MissingOpposingKeywords, 422),
    (ValidationError, 422),
    (IntentForgeError, 422),
]


def _status_for(exc: IntentForgeError) -> int:
    for klass, status in _STATUS_BY_ERROR:
        if isinstance(exc, klass):
            return status
    return 500


def create_app(data_root: str | Path,
               backends: ServiceBackends | None = None) -> FastAPI:
    store = ProjectStore(data_root, backends)
    app = FastAPI(title="intentforge", version="0.1.0")
    app.state.store = store

    @app.exception_handler(IntentForgeError)
    async def domain_error(request: Request, exc: IntentForgeError):
        return JSONResponse(
            status_code=_status_for(exc),
            content={"code": exc.code, "message": exc.message,
                     "detail": exc.detail},
        )

    @app.exception_handler(RequestValidationError)
    async def schema_error(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=422,
            content={
                "code": "schema_validation",
                "message": "request body failed schema validation",
                "detail": {"errors": [
                    {"loc": [str(x) for x in e["loc"]], "msg": e["msg"]}
                    for e in exc.errors()
                ]},
            },
        )

    # --- projects ---

    @app.post("/projects")
    def create_project(body: CreateProjectRequest):
        project = store.create_project(body.name)
        return {"project_id": project.project_id, "name": project.name}

    @app.get("/projects")
    def list_projects():
        return {"projects": [p.to_dict() for p in store.list_projects()]}

    @app.get("/projects/{project_id}")
    def get_project(project_id: str):
        return store.get_project(project_id).to_dict()

    # --- images ---

    @app.post("/projects/{project_id}/images")
    def upload_images(project_id: str, body: UploadImagesRequest):
        files = []
        for entry in body.files:
            try:
                payload = base64.b64decode(entry.content_base64, validate=True)
            except (binascii.Error, ValueError) as exc:
                raise UnsupportedFormat(
                    f"file {entry.filename!r} is not valid base64",
                    {"filename": entry.filename},
                ) from exc
            files.append((entry.filename, payload))
        return {"image_ids": store.upload_images(project_id, files)}

    @app.get("/projects/{project_id}/images/{image_id}")
    def get_image(project_id: str, image_id: str):
        return FileResponse(store.image_path(project_id, image_id))

    # --- intent ---

    @app.post("/projects/{project_id}/intent")
    def submit_intent(project_id: str, body: SubmitIntentRequest):
        regions = [
            Region(
                region_id=r.region_id,
                image_id=r.image_id,
                bbox=BBox.from_list(r.bbox),
                color_index=r.color_index,
            )
            for r in body.regions
        ]
        return store.submit_intent(project_id, body.text, regions, body.backend)

    @app.get("/projects/{project_id}/spec")
    def get_spec(project_id: str):
        return store.get_spec(project_id)

    @app.put("/projects/{project_id}/spec")
    def update_spec(project_id: str, body: SpecPayload):
        return store.update_spec(project_id, body.model_dump())

    # --- preprocessing / captions ---

    @app.post("/projects/{project_id}/preprocess")
    def preprocess(project_id: str, body: PreprocessRequest | None = None):
        body = body or PreprocessRequest()
        from ..augmentation import Thresholds

        thresholds = Thresholds(
            score=body.score_threshold,
            similarity=body.sim_threshold,
            modify_trigger=body.modify_trigger_threshold,
        )
        return store.preprocess(
            project_id, body.caption_synonyms or None, thresholds
        )

    @app.get("/projects/{project_id}/captions")
    def get_captions(project_id: str):
        return {"captions": store.get_captions(project_id)}

    @app.put("/projects/{project_id}/captions")
    def put_caption(project_id: str, body: PutCaptionRequest):
        return store.put_caption(project_id, body.path, body.caption)

    @app.post("/projects/{project_id}/captions/propagate")
    def propagate(project_id: str, body: PropagateEditRequest):
        changed = store.propagate_caption_edit(
            project_id, body.find, body.replace, body.scope
        )
        return {"changed": changed}

    @app.get("/projects/{project_id}/dataset/{folder}/{filename}")
    def dataset_file(project_id: str, folder: str, filename: str):
        return FileResponse(store.dataset_file(project_id, f"{folder}/{filename}"))

    # --- training ---

    @app.post("/projects/{project_id}/train")
    def train(project_id: str, body: TrainRequest | None = None):
        body = body or TrainRequest()
        overrides = body.model_dump(exclude={"opposing_keywords"})
        return store.start_training(
            project_id, overrides, body.opposing_keywords or None
        )

    @app.post("/runs/{run_id}/stop")
    def stop_run(run_id: str):
        run = store.registry.stop_run(run_id)
        return {"run_id": run_id, "status": run.status.value}

    @app.get("/runs/{run_id}")
    def run_status(run_id: str):
        return store.run_status(run_id)

    @app.get("/runs/{run_id}/events")
    def metric_events(run_id: str, after_step: int = 0):
        return store.metric_events(run_id, after_step)

    @app.get("/runs/{run_id}/checkpoints/{step}/cover.png")
    def cover(run_id: str, step: int):
        return FileResponse(store.cover_path(run_id, step))

    # --- model library / evaluation / generation ---

    @app.get("/projects/{project_id}/models")
    def list_models(project_id: str):
        return {"models": store.list_models(project_id)}

    @app.post("/runs/{run_id}/checkpoints/{step}/evaluate")
    def evaluate(run_id: str, step: int, body: EvaluateRequest | None = None):
        body = body or EvaluateRequest()
        overrides = None
        if body.metrics is not None:
            overrides = []
            known_refs = store.registry.reference_concepts(run_id)
            for m in body.metrics:
                if m.kind == "stability":
                    if m.concept_name not in known_refs:
                        raise ValidationError(
                            f"no reference crops for concept {m.concept_name!r}",
                            {"concept": m.concept_name},
                        )
                    overrides.append(MetricSpec(
                        kind="stability",
                        metric_name=f"stability:{m.concept_name}",
                        concept_name=m.concept_name,
                        prompt="",
                    ))
                elif m.kind == "controllability":
                    if not m.intended or not m.opposing:
                        raise ValidationError(
                            "controllability metric needs intended and "
                            "opposing keywords"
                        )
                    overrides.append(MetricSpec(
                        kind="controllability",
                        metric_name=f"controllability:{m.concept_name}",
                        concept_name=m.concept_name,
                        prompt="",
                        keyword_pair=KeywordPair(
                            m.intended, m.opposing, m.concept_name
                        ),
                    ))
                else:
                    raise ValidationError(f"unknown metric kind {m.kind!r}")
        images, scores = store.registry.evaluate_checkpoint(
            run_id, step, prompt=body.prompt, metric_overrides=overrides,
            batch_size=body.batch_size,
        )
        return {
            "images_base64": [store.encode_image(img) for img in images],
            "scores": [{"metric_name": n, "value": v} for n, v in scores],
        }

    @app.post("/runs/{run_id}/checkpoints/{step}/generate")
    def generate(run_id: str, step: int, body: GenerateRequest):
        image = store.registry.generate(run_id, step, body.prompt, body.seed)
        return {"image_base64": store.encode_image(image)}

    return app
