"""Exception hierarchy shared across the package.

Every error carries a stable ``code`` string so the HTTP layer can emit
machine-renderable bodies without string matching.
"""

from __future__ import annotations


class IntentForgeError(Exception):
    """Base class for all domain errors."""

    code = "internal_error"

    def __init__(self, message: str, detail: dict | None = None):
        super().__init__(message)
        self.message = message
        self.detail = detail or {}


# --- intent model ---

class MalformedBracket(IntentForgeError):
    code = "malformed_bracket"


class DanglingReference(IntentForgeError):
    code = "dangling_reference"


class ValidationError(IntentForgeError):
    code = "validation_error"


class InvalidOperationForGranularity(ValidationError):
    code = "invalid_operation_for_granularity"


class EmptyConcepts(ValidationError):
    code = "empty_concepts"


class EmptyTriggerWord(ValidationError):
    code = "empty_trigger_word"


class DuplicateConceptName(ValidationError):
    code = "duplicate_concept_name"


# --- transformer ---

class TransformFailure(IntentForgeError):
    code = "transform_failure"


class MissingOpposingKeywords(IntentForgeError):
    code = "missing_opposing_keywords"


# --- augmentation ---

class DetectorFailure(IntentForgeError):
    code = "detector_failure"


class InpaintFailure(IntentForgeError):
    code = "inpaint_failure"


class DegenerateCrop(IntentForgeError):
    code = "degenerate_crop"


class AugmentationFailure(IntentForgeError):
    code = "augmentation_failure"


# --- captioning ---

class CaptionerFailure(IntentForgeError):
    code = "captioner_failure"


class RewriterFailure(IntentForgeError):
    code = "rewriter_failure"


# --- metrics ---

class EmptyBatch(IntentForgeError):
    code = "empty_batch"


class EmptyReferences(IntentForgeError):
    code = "empty_references"


class NonMonotonicStep(IntentForgeError):
    code = "non_monotonic_step"


# --- orchestrator ---

class UnknownDomain(IntentForgeError):
    code = "unknown_domain"


class DatasetEmpty(IntentForgeError):
    code = "dataset_empty"


class TrainerStartFailure(IntentForgeError):
    code = "trainer_start_failure"


class InvalidState(IntentForgeError):
    code = "invalid_state"


class UnknownCheckpoint(IntentForgeError):
    code = "unknown_checkpoint"


class UnknownRun(IntentForgeError):
    code = "unknown_run"


# --- service ---

class DuplicateName(IntentForgeError):
    code = "duplicate_name"


class UnknownProject(IntentForgeError):
    code = "unknown_project"


class UnsupportedFormat(IntentForgeError):
    code = "unsupported_format"
