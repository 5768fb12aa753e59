"""Turn annotated free-text input into a validated intent specification,
and derive the monitoring/controllability prompt plan.

Two backends exist. The rule backend is the deterministic reference: it
expects the input text to be the canonical spec JSON (the structured form
produced by the UI's strategy editor) and validates it as-is. The LLM
backend sends a few-shot chain-of-thought prompt to an HTTP completion
endpoint and parses the reply as canonical spec JSON, with exactly one
retry on an unparsable reply.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from importlib import resources
from typing import Protocol

import httpx

from .errors import MissingOpposingKeywords, TransformFailure, ValidationError
from .intent_model import (
    AnnotatedIntentInput,
    IntentSpecification,
    Operation,
    spec_from_json,
    validate_specification,
)


class TransformerBackend(Protocol):
    name: str
    #: structured backends take canonical spec JSON as the input text and
    #: bypass bracket-reference parsing
    structured: bool

    def transform(self, parsed: AnnotatedIntentInput) -> IntentSpecification: ...


class RuleBackend:
    """Validating pass-through over structured (canonical JSON) input."""

    name = "rule"
    structured = True

    def transform(self, parsed: AnnotatedIntentInput) -> IntentSpecification:
        try:
            spec = spec_from_json(parsed.text)
        except ValidationError as exc:
            raise TransformFailure(
                f"rule backend requires structured spec JSON input: {exc.message}"
            ) from exc
        return spec


def _load_fewshot_prompt() -> str:
    return (
        resources.files("intentforge.assets")
        .joinpath("fewshot_prompt.txt")
        .read_text(encoding="utf-8")
    )


class LLMBackend:
    """Completion-endpoint backend; one retry on unparsable replies.

    Endpoint configuration: base_url and model via constructor, auth token
    from the INTENTFORGE_LLM_TOKEN environment variable.
    """

    name = "llm"
    structured = False

    def __init__(self, base_url: str, model: str, timeout: float = 60.0,
                 client: httpx.Client | None = None):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.client = client or httpx.Client(timeout=timeout)

    def _complete(self, parsed: AnnotatedIntentInput) -> str:
        headers = {}
        token = os.environ.get("INTENTFORGE_LLM_TOKEN")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        payload = {
            "model": self.model,
            "prompt": _load_fewshot_prompt(),
            "input": {
                "text": parsed.text,
                "regions": [
                    {"region_id": r.region_id, "image_id": r.image_id,
                     "bbox": r.bbox.to_list()}
                    for r in parsed.regions
                ],
            },
        }
        response = self.client.post(
            f"{self.base_url}/complete", json=payload, headers=headers
        )
        response.raise_for_status()
        return response.json()["completion"]

    def transform(self, parsed: AnnotatedIntentInput) -> IntentSpecification:
        last_error: Exception | None = None
        for _ in range(2):  # initial attempt + one retry
            try:
                return spec_from_json(self._complete(parsed))
            except (ValidationError, httpx.HTTPError, KeyError, TypeError) as exc:
                last_error = exc
        raise TransformFailure(
            f"backend reply unparsable after 1 retry: {last_error}"
        ) from last_error


def transform_intent(
    parsed: AnnotatedIntentInput, backend: TransformerBackend
) -> IntentSpecification:
    """Run the backend and validate its output, attaching parsed region links."""
    spec = backend.transform(parsed)
    known_ids = {r.region_id for r in parsed.regions}
    return validate_specification(spec, known_region_ids=known_ids)


@dataclass(frozen=True)
class PromptPlan:
    monitoring_prompts: tuple[str, ...]
    controllability_pairs: dict[str, tuple[str, str]] = field(default_factory=dict)
    negative_prompts: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "monitoring_prompts": list(self.monitoring_prompts),
            "controllability_pairs": {
                k: list(v) for k, v in self.controllability_pairs.items()
            },
            "negative_prompts": list(self.negative_prompts),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PromptPlan":
        return cls(
            monitoring_prompts=tuple(data["monitoring_prompts"]),
            controllability_pairs={
                k: (v[0], v[1])
                for k, v in data.get("controllability_pairs", {}).items()
            },
            negative_prompts=tuple(data.get("negative_prompts", ())),
        )


def recommend_prompts(
    spec: IntentSpecification,
    opposing_overrides: dict[str, tuple[str, str]] | None = None,
) -> PromptPlan:
    """Build the monitoring prompt set and controllability keyword pairs.

    Every modify concept must end up with an opposing pair, either from the
    spec itself or from *opposing_overrides* (user-supplied).
    """
    overrides = opposing_overrides or {}
    trigger = spec.trigger_word

    prompts = [trigger]
    pairs: dict[str, tuple[str, str]] = {}
    negatives: list[str] = []

    for concept in spec.concepts:
        if concept.operation in (Operation.KEEP, Operation.MODIFY):
            prompts.append(f"{trigger}, {concept.name}")
        if concept.operation == Operation.MODIFY:
            pair = overrides.get(concept.name) or concept.opposing_keywords
            if pair is None:
                raise MissingOpposingKeywords(
                    f"modify concept {concept.name!r} needs an opposing "
                    "keyword pair",
                    {"concept": concept.name},
                )
            pairs[concept.name] = (pair[0], pair[1])
        if concept.operation == Operation.DELETE and concept.granularity.value == "imagery":
            # imagery has no bounding box to inpaint; suppress at generation time
            negatives.append(concept.name)

    return PromptPlan(
        monitoring_prompts=tuple(prompts),
        controllability_pairs=pairs,
        negative_prompts=tuple(negatives),
    )
