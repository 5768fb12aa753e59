"""Structured intent model: regions, bracket references, concepts, and the
validation rules that decide which (granularity, operation) pairs are legal.

The bracket grammar is deliberately tiny: a reference token is exactly
``[`` one-or-more ASCII digits ``]``. Bracketed text without digits is
treated as plain prose; bracketed text mixing digits with anything else is
rejected as malformed rather than silently ignored.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from enum import Enum

from .errors import (
    DanglingReference,
    DuplicateConceptName,
    EmptyConcepts,
    EmptyTriggerWord,
    InvalidOperationForGranularity,
    MalformedBracket,
    ValidationError,
)


class Granularity(str, Enum):
    ATTRIBUTE = "attribute"
    INSTANCE = "instance"
    IMAGERY = "imagery"


class Operation(str, Enum):
    KEEP = "keep"
    MODIFY = "modify"
    DELETE = "delete"


class Domain(str, Enum):
    PAINTING = "painting"
    HUMAN_PORTRAIT = "human_portrait"
    CHARACTER_2D = "character_2d"
    PRODUCT = "product"
    OTHER = "other"


#: Allowed (operation -> granularities) matrix. Delete is restricted to
#: instance/imagery; modify to attribute/instance (imagery-level modify has
#: no switchable counterpart, use keep or delete instead).
ALLOWED_OPERATIONS: dict[Operation, frozenset[Granularity]] = {
    Operation.KEEP: frozenset(
        {Granularity.ATTRIBUTE, Granularity.INSTANCE, Granularity.IMAGERY}
    ),
    Operation.MODIFY: frozenset({Granularity.ATTRIBUTE, Granularity.INSTANCE}),
    Operation.DELETE: frozenset({Granularity.INSTANCE, Granularity.IMAGERY}),
}


@dataclass(frozen=True)
class BBox:
    """Normalized rectangle; all coordinates in [0, 1]."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (0.0 <= self.x_min < self.x_max <= 1.0):
            raise ValidationError(
                f"invalid x extent: [{self.x_min}, {self.x_max}]"
            )
        if not (0.0 <= self.y_min < self.y_max <= 1.0):
            raise ValidationError(
                f"invalid y extent: [{self.y_min}, {self.y_max}]"
            )

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def to_list(self) -> list[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]

    @classmethod
    def from_list(cls, values) -> "BBox":
        return cls(*map(float, values))


@dataclass(frozen=True)
class Region:
    """A numbered rectangle drawn on a source image."""

    region_id: int
    image_id: str
    bbox: BBox
    color_index: int = 0

    def __post_init__(self):
        if self.region_id < 1:
            raise ValidationError(f"region_id must be positive: {self.region_id}")


@dataclass(frozen=True)
class Link:
    """Binding of one bracket token in the text to a region."""

    span: tuple[int, int]  # [start, end) character offsets of the token
    region_id: int


@dataclass(frozen=True)
class AnnotatedIntentInput:
    text: str
    regions: tuple[Region, ...] = ()
    links: tuple[Link, ...] = ()


@dataclass(frozen=True)
class ConceptIntent:
    name: str
    granularity: Granularity
    operation: Operation
    region_ids: tuple[int, ...] = ()
    opposing_keywords: tuple[str, str] | None = None


@dataclass(frozen=True)
class IntentSpecification:
    domain: Domain
    trigger_word: str
    concepts: tuple[ConceptIntent, ...]

    def concept(self, name: str) -> ConceptIntent:
        for c in self.concepts:
            if c.name == name:
                return c
        raise KeyError(name)

    def by_operation(self, op: Operation) -> tuple[ConceptIntent, ...]:
        return tuple(c for c in self.concepts if c.operation == op)


# Candidate token: "[" + run of non-"]" + "]". Only digit-bearing contents
# are in the reference grammar.
_BRACKET_CANDIDATE = re.compile(r"\[([^\[\]]*)\]")


def parse_annotated_text(text: str, regions: list[Region]) -> AnnotatedIntentInput:
    """Resolve ``[N]`` tokens in *text* against *regions*.

    Raises MalformedBracket for a digit-bearing token that is not purely
    digits, and DanglingReference when a number has no matching region.
    """
    by_id: dict[int, Region] = {}
    for r in regions:
        if r.region_id in by_id:
            raise ValidationError(f"duplicate region_id {r.region_id}")
        by_id[r.region_id] = r

    links: list[Link] = []
    for m in _BRACKET_CANDIDATE.finditer(text):
        content = m.group(1)
        if content.isdigit():
            rid = int(content)
            if rid not in by_id:
                raise DanglingReference(
                    f"bracket reference [{rid}] has no matching region",
                    {"region_id": rid},
                )
            links.append(Link(span=(m.start(), m.end()), region_id=rid))
        elif any(ch.isdigit() for ch in content):
            raise MalformedBracket(
                f"bracket token {m.group(0)!r} mixes digits with other characters",
                {"token": m.group(0)},
            )
        # no digits at all: plain bracketed prose, not a reference

    return AnnotatedIntentInput(
        text=text, regions=tuple(regions), links=tuple(links)
    )


def reconstruct_text(parsed: AnnotatedIntentInput) -> str:
    """Rebuild the original text from non-link segments plus bracket tokens."""
    pieces = []
    cursor = 0
    for link in sorted(parsed.links, key=lambda l: l.span[0]):
        start, end = link.span
        pieces.append(parsed.text[cursor:start])
        pieces.append(f"[{link.region_id}]")
        cursor = end
    pieces.append(parsed.text[cursor:])
    return "".join(pieces)


def validate_specification(
    spec: IntentSpecification,
    known_region_ids: set[int] | None = None,
) -> IntentSpecification:
    """Check all structural invariants and return the spec unchanged.

    When *known_region_ids* is given, concept region references must resolve
    against it (the region set of the originating annotated input).
    """
    if not spec.trigger_word or not spec.trigger_word.strip():
        raise EmptyTriggerWord("trigger word must be non-empty")
    if not spec.concepts:
        raise EmptyConcepts("specification needs at least one concept")

    seen: set[str] = set()
    for concept in spec.concepts:
        if not concept.name or not concept.name.strip():
            raise ValidationError("concept name must be non-empty")
        if concept.name in seen:
            raise DuplicateConceptName(
                f"concept {concept.name!r} appears more than once",
                {"concept": concept.name},
            )
        seen.add(concept.name)

        allowed = ALLOWED_OPERATIONS[concept.operation]
        if concept.granularity not in allowed:
            hint = ""
            if (concept.operation, concept.granularity) == (
                Operation.MODIFY,
                Granularity.IMAGERY,
            ):
                hint = "; use keep or delete for imagery-level concepts"
            raise InvalidOperationForGranularity(
                f"{concept.operation.value} is not allowed at the "
                f"{concept.granularity.value} level for {concept.name!r}{hint}",
                {
                    "concept": concept.name,
                    "operation": concept.operation.value,
                    "granularity": concept.granularity.value,
                },
            )

        if concept.opposing_keywords is not None:
            a, b = concept.opposing_keywords
            if not a or not b or a == b:
                raise ValidationError(
                    f"opposing keywords for {concept.name!r} must be two "
                    "distinct non-empty strings"
                )

        if known_region_ids is not None:
            for rid in concept.region_ids:
                if rid not in known_region_ids:
                    raise ValidationError(
                        f"concept {concept.name!r} references unknown region {rid}"
                    )

    return spec


# --- canonical JSON serialization ---

def spec_to_dict(spec: IntentSpecification) -> dict:
    return {
        "domain": spec.domain.value,
        "trigger_word": spec.trigger_word,
        "concepts": [
            {
                "name": c.name,
                "granularity": c.granularity.value,
                "operation": c.operation.value,
                "region_ids": list(c.region_ids),
                "opposing_keywords": (
                    list(c.opposing_keywords) if c.opposing_keywords else None
                ),
            }
            for c in spec.concepts
        ],
    }


_CONCEPT_KEYS = {"name", "granularity", "operation", "region_ids", "opposing_keywords"}
_SPEC_KEYS = {"domain", "trigger_word", "concepts"}


def spec_from_dict(data: dict) -> IntentSpecification:
    """Parse the canonical JSON document; unknown keys are rejected."""
    if not isinstance(data, dict):
        raise ValidationError("spec document must be a JSON object")
    extra = set(data) - _SPEC_KEYS
    if extra:
        raise ValidationError(f"unknown spec fields: {sorted(extra)}")
    try:
        domain = Domain(data["domain"])
    except (KeyError, ValueError) as exc:
        raise ValidationError(f"bad or missing domain: {exc}") from exc

    concepts = []
    for raw in data.get("concepts", []):
        extra = set(raw) - _CONCEPT_KEYS
        if extra:
            raise ValidationError(f"unknown concept fields: {sorted(extra)}")
        try:
            opposing = raw.get("opposing_keywords")
            concepts.append(
                ConceptIntent(
                    name=raw["name"],
                    granularity=Granularity(raw["granularity"]),
                    operation=Operation(raw["operation"]),
                    region_ids=tuple(int(r) for r in raw.get("region_ids", [])),
                    opposing_keywords=(
                        (str(opposing[0]), str(opposing[1])) if opposing else None
                    ),
                )
            )
        except (KeyError, ValueError, IndexError, TypeError) as exc:
            raise ValidationError(f"bad concept entry: {exc}") from exc

    return IntentSpecification(
        domain=domain,
        trigger_word=str(data.get("trigger_word", "")),
        concepts=tuple(concepts),
    )


def spec_to_json(spec: IntentSpecification) -> str:
    return json.dumps(spec_to_dict(spec), indent=2, ensure_ascii=False)


def spec_from_json(document: str) -> IntentSpecification:
    try:
        data = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"spec document is not valid JSON: {exc}") from exc
    return spec_from_dict(data)
