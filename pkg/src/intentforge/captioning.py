"""Caption generation and intent-aligned optimization.

Captions always carry the trigger word as a ``"<trigger>, "`` prefix.
Keep-concepts get their describing phrases removed so the visual concept
binds to the trigger word; modify-concepts get a region-level detail
caption merged in so the concept stays promptable.

The deterministic rule backend works on comma-delimited clauses with
per-concept keyword phrase lists; an LLM rewriter can be slotted in via
the same interface.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

from .errors import CaptionerFailure, RewriterFailure, ValidationError
from .intent_model import BBox, ConceptIntent, Operation

logger = logging.getLogger(__name__)


class CaptionerBackend(Protocol):
    name: str

    def caption(self, image) -> str: ...

    def caption_region(self, image, bbox: BBox) -> str: ...


class CaptionRewriterBackend(Protocol):
    name: str

    def remove_related(self, caption_text: str, concept_name: str) -> str: ...

    def merge(self, initial: str, detail: str, concept_name: str) -> str: ...


@dataclass(frozen=True)
class Caption:
    text: str
    trigger_word: str
    highlights: tuple[tuple[tuple[int, int], str], ...] = ()

    @property
    def prefix(self) -> str:
        return f"{self.trigger_word}, "

    @property
    def body(self) -> str:
        return self.text[len(self.prefix):]


def compute_highlights(
    text: str, keywords: dict[str, list[str]]
) -> tuple[tuple[tuple[int, int], str], ...]:
    """Locate intent-related content by case-insensitive substring match."""
    spans: list[tuple[tuple[int, int], str]] = []
    lowered = text.lower()
    for concept_name, phrases in keywords.items():
        for phrase in phrases:
            needle = phrase.lower()
            if not needle:
                continue
            start = 0
            while (idx := lowered.find(needle, start)) != -1:
                spans.append(((idx, idx + len(needle)), concept_name))
                start = idx + len(needle)
    spans.sort(key=lambda s: s[0])
    return tuple(spans)


def keywords_from_spec(
    spec, synonyms: dict[str, list[str]] | None = None
) -> dict[str, list[str]]:
    """Per-concept keyword phrase lists: the concept name plus any
    user-supplied synonyms."""
    synonyms = synonyms or {}
    return {
        c.name: [c.name] + list(synonyms.get(c.name, []))
        for c in spec.concepts
    }


class RuleRewriter:
    """Clause-based rewriter driven by per-concept keyword phrase lists.

    A clause is a comma-delimited segment. The first clause is the trigger
    prefix and is never touched. Removal deletes keyword phrase occurrences
    inside each clause and drops clauses that become empty; if every body
    clause would be dropped, the shortest original body clause is kept so
    the caption never collapses to the bare trigger word.
    """

    name = "rule"

    def __init__(self, keywords: dict[str, list[str]] | None = None):
        self.keywords = dict(keywords or {})

    def phrases_for(self, concept_name: str) -> list[str]:
        phrases = list(self.keywords.get(concept_name, []))
        if concept_name not in phrases:
            phrases.append(concept_name)
        # longest first so contained phrases don't shadow longer ones
        return sorted(phrases, key=len, reverse=True)

    def remove_related(self, caption_text: str, concept_name: str) -> str:
        clauses = caption_text.split(", ")
        if len(clauses) < 2:
            return caption_text
        prefix, body = clauses[0], clauses[1:]
        phrases = self.phrases_for(concept_name)

        rewritten: list[str] = []
        for clause in body:
            cleaned = clause
            for phrase in phrases:
                cleaned = re.sub(re.escape(phrase), "", cleaned, flags=re.IGNORECASE)
            cleaned = re.sub(r"\s+", " ", cleaned).strip()
            if cleaned:
                rewritten.append(cleaned)

        if not rewritten:
            rewritten = [min(body, key=len)]
        return ", ".join([prefix] + rewritten)

    def merge(self, initial: str, detail: str, concept_name: str) -> str:
        if not detail.strip():
            raise RewriterFailure("detail caption is empty")
        clauses = initial.split(", ")
        prefix, body = clauses[0], clauses[1:]
        phrases = self.phrases_for(concept_name)

        mentioned_at = None
        for i, clause in enumerate(body):
            if any(p.lower() in clause.lower() for p in phrases):
                mentioned_at = i
                break

        if mentioned_at is None:
            body = body + [detail.strip()]
        else:
            body[mentioned_at] = detail.strip()
        return ", ".join([prefix] + body)


class StubCaptioner:
    """Deterministic captioner: a fixed template keyed by coarse image
    statistics, so identical images always caption identically."""

    name = "stub-captioner"

    def __init__(self, template: str = "a photo with mean brightness {level}"):
        self.template = template

    def _level(self, image) -> int:
        import numpy as np

        return int(np.asarray(image).mean() // 32)

    def caption(self, image) -> str:
        return self.template.format(level=self._level(image))

    def caption_region(self, image, bbox: BBox) -> str:
        import numpy as np

        pixels = np.asarray(image)
        h, w = pixels.shape[:2]
        x0, y0 = int(bbox.x_min * w), int(bbox.y_min * h)
        x1, y1 = max(int(bbox.x_max * w), x0 + 1), max(int(bbox.y_max * h), y0 + 1)
        region = pixels[y0:y1, x0:x1]
        return f"a detailed region with mean brightness {int(region.mean() // 32)}"


def _content_words(text: str) -> set[str]:
    return {w for w in re.findall(r"[a-z0-9]+", text.lower()) if len(w) > 2}


def initial_caption(
    image, trigger_word: str, captioner: CaptionerBackend,
    keywords: dict[str, list[str]] | None = None,
) -> Caption:
    if not trigger_word or not trigger_word.strip():
        raise ValidationError("trigger word must be non-empty")
    raw = captioner.caption(image)
    if not raw or not raw.strip():
        raise CaptionerFailure("captioner returned an empty caption")
    text = f"{trigger_word}, {raw.strip()}"
    return Caption(
        text=text,
        trigger_word=trigger_word,
        highlights=compute_highlights(text, keywords or {}),
    )


def optimize_keep(
    caption: Caption, concept: ConceptIntent, rewriter: CaptionRewriterBackend,
    keywords: dict[str, list[str]] | None = None,
) -> Caption:
    if concept.operation is not Operation.KEEP:
        raise ValidationError(
            f"optimize_keep called for {concept.operation.value} concept "
            f"{concept.name!r}"
        )
    text = rewriter.remove_related(caption.text, concept.name)
    if not text.startswith(caption.prefix):
        raise RewriterFailure("rewriter dropped the trigger-word prefix")
    return Caption(
        text=text,
        trigger_word=caption.trigger_word,
        highlights=compute_highlights(text, keywords or {}),
    )


def optimize_modify(
    caption: Caption, image, box, concept: ConceptIntent,
    captioner: CaptionerBackend, rewriter: CaptionRewriterBackend,
    keywords: dict[str, list[str]] | None = None,
) -> Caption:
    if concept.operation is not Operation.MODIFY:
        raise ValidationError(
            f"optimize_modify called for {concept.operation.value} concept "
            f"{concept.name!r}"
        )
    if box.concept_name != concept.name:
        raise ValidationError(
            f"box is for {box.concept_name!r}, expected {concept.name!r}"
        )
    detail = captioner.caption_region(image, box.bbox)
    if not detail or not detail.strip():
        raise CaptionerFailure(
            f"empty region caption for concept {concept.name!r}"
        )
    text = rewriter.merge(caption.text, detail, concept.name)
    if not text.startswith(caption.prefix):
        raise RewriterFailure("rewriter dropped the trigger-word prefix")
    if not (_content_words(detail) & _content_words(text)):
        raise RewriterFailure(
            "merged caption lost all detail-caption content words"
        )
    return Caption(
        text=text,
        trigger_word=caption.trigger_word,
        highlights=compute_highlights(text, keywords or {}),
    )


def propagate_edit(
    dataset, find: str, replace: str, scope: str = "all"
) -> int:
    """Apply a find/replace to every caption sidecar in *scope*.

    Scope is either a folder name or "all". Edited files keep a ``.bak``
    of the previous version for one generation. Returns the number of
    captions changed; zero matches is a valid no-op.
    """
    if not find:
        raise ValidationError("find string must be non-empty")

    changed = 0
    root = Path(dataset.root_path)
    for item in dataset.items:
        folder = item.relative_path.split("/", 1)[0]
        if scope != "all" and folder != scope:
            continue
        sidecar = root / Path(item.relative_path).with_suffix(".txt")
        old = sidecar.read_text(encoding="utf-8")
        new = old.replace(find, replace)
        if new != old:
            sidecar.with_suffix(".txt.bak").write_text(old, encoding="utf-8")
            sidecar.write_text(new, encoding="utf-8")
            item.caption = new
            changed += 1
    return changed
