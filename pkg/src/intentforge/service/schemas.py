"""Request/response schemas for the HTTP API.

All request models are strict: unknown fields are rejected so client bugs
surface immediately instead of being silently dropped.
"""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class CreateProjectRequest(StrictModel):
    name: str = Field(min_length=1)


class UploadFileEntry(StrictModel):
    filename: str
    content_base64: str


class UploadImagesRequest(StrictModel):
    files: list[UploadFileEntry] = Field(min_length=1)


class RegionPayload(StrictModel):
    region_id: int = Field(ge=1)
    image_id: str
    bbox: list[float] = Field(min_length=4, max_length=4)
    color_index: int = 0


class SubmitIntentRequest(StrictModel):
    text: str
    regions: list[RegionPayload] = Field(default_factory=list)
    backend: str = "rule"


class ConceptPayload(StrictModel):
    name: str
    granularity: str
    operation: str
    region_ids: list[int] = Field(default_factory=list)
    opposing_keywords: list[str] | None = None


class SpecPayload(StrictModel):
    domain: str
    trigger_word: str
    concepts: list[ConceptPayload]


class PreprocessRequest(StrictModel):
    caption_synonyms: dict[str, list[str]] = Field(default_factory=dict)
    score_threshold: float = 0.35
    sim_threshold: float = 0.60
    modify_trigger_threshold: float = 0.40


class PutCaptionRequest(StrictModel):
    path: str
    caption: str


class PropagateEditRequest(StrictModel):
    find: str = Field(min_length=1)
    replace: str
    scope: str = "all"


class TrainRequest(StrictModel):
    epochs: int | None = None
    batch_size: int | None = None
    seed: int | None = None
    base_model_id: str | None = None
    unet_lr: float | None = None
    text_encoder_lr: float | None = None
    lora_dimension: int | None = None
    lora_alpha: int | None = None
    opposing_keywords: dict[str, list[str]] = Field(default_factory=dict)


class MetricOverridePayload(StrictModel):
    kind: str
    concept_name: str
    intended: str | None = None
    opposing: str | None = None


class EvaluateRequest(StrictModel):
    prompt: str | None = None
    metrics: list[MetricOverridePayload] | None = None
    batch_size: int | None = None


class GenerateRequest(StrictModel):
    prompt: str
    seed: int = 0


class ErrorBody(StrictModel):
    code: str
    message: str
    detail: dict = Field(default_factory=dict)
