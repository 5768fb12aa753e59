import numpy as np
import pytest

# Release-criterion results recorded by tests/test_acceptance.py; echoed
# after the run so the gate is readable straight from the terminal.
ACCEPTANCE_RESULTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)

from intentforge.augmentation import (
    AugmentBackends,
    HashEmbedder,
    ImageRecord,
    ManifestDetector,
    MeanFillInpainter,
)
from intentforge.captioning import RuleRewriter, StubCaptioner
from intentforge.intent_model import (
    BBox,
    ConceptIntent,
    Domain,
    Granularity,
    IntentSpecification,
    Operation,
    Region,
)

# Portrait-style synthetic fixture: 7 images, a shared face block, two
# mutually exclusive jacket textures, and a necklace strip to delete.
SIZE = 256
FACE_BOX = BBox(0.30, 0.10, 0.70, 0.40)
NECKLACE_BOX = BBox(0.40, 0.42, 0.60, 0.46)
JACKET_BOX = BBox(0.25, 0.50, 0.75, 0.90)

LEATHER_IMAGES = ["img0", "img1", "img2"]
STRIPED_IMAGES = ["img3", "img4"]
PLAIN_IMAGES = ["img5", "img6"]
ALL_IMAGES = LEATHER_IMAGES + STRIPED_IMAGES + PLAIN_IMAGES


def _rect(pixels: np.ndarray, box: BBox):
    h, w = pixels.shape[:2]
    return (
        int(round(box.y_min * h)), int(round(box.y_max * h)),
        int(round(box.x_min * w)), int(round(box.x_max * w)),
    )


def _paint(pixels: np.ndarray, box: BBox, value) -> None:
    y0, y1, x0, x1 = _rect(pixels, box)
    pixels[y0:y1, x0:x1] = value


def _paint_stripes(pixels: np.ndarray, box: BBox) -> None:
    y0, y1, x0, x1 = _rect(pixels, box)
    for row in range(y0, y1):
        pixels[row, x0:x1] = (15, 15, 15) if (row // 8) % 2 == 0 else (230, 230, 230)


def make_portrait(image_id: str) -> ImageRecord:
    idx = ALL_IMAGES.index(image_id)
    pixels = np.full((SIZE, SIZE, 3), 90 + 10 * idx, dtype=np.uint8)
    _paint(pixels, FACE_BOX, (200, 170, 150))
    _paint(pixels, NECKLACE_BOX, (250, 220, 40))
    if image_id in LEATHER_IMAGES:
        _paint(pixels, JACKET_BOX, (25, 25, 30))
    elif image_id in STRIPED_IMAGES:
        _paint_stripes(pixels, JACKET_BOX)
    return ImageRecord(image_id, pixels)


@pytest.fixture
def portrait_images() -> list[ImageRecord]:
    return [make_portrait(i) for i in ALL_IMAGES]


@pytest.fixture
def portrait_regions() -> list[Region]:
    return [
        Region(1, "img0", JACKET_BOX, color_index=0),
        Region(2, "img3", JACKET_BOX, color_index=1),
    ]


@pytest.fixture
def portrait_spec() -> IntentSpecification:
    return IntentSpecification(
        domain=Domain.HUMAN_PORTRAIT,
        trigger_word="Vincent",
        concepts=(
            ConceptIntent("face", Granularity.INSTANCE, Operation.KEEP),
            ConceptIntent(
                "black leather jacket", Granularity.INSTANCE, Operation.MODIFY,
                region_ids=(1,),
                opposing_keywords=("black leather jacket", "black striped jacket"),
            ),
            ConceptIntent(
                "black striped jacket", Granularity.INSTANCE, Operation.MODIFY,
                region_ids=(2,),
                opposing_keywords=("black striped jacket", "black leather jacket"),
            ),
            ConceptIntent("necklace", Granularity.INSTANCE, Operation.DELETE),
        ),
    )


@pytest.fixture
def portrait_manifest() -> dict:
    manifest = {}
    for image_id in ALL_IMAGES:
        entries = [
            ("face", FACE_BOX, 0.95),
            ("necklace", NECKLACE_BOX, 0.9),
        ]
        if image_id in LEATHER_IMAGES:
            # GroundingDino-style ambiguity: both jacket phrasings match
            entries.append(("black leather jacket", JACKET_BOX, 0.88))
            entries.append(("black striped jacket", JACKET_BOX, 0.80))
        elif image_id in STRIPED_IMAGES:
            entries.append(("black leather jacket", JACKET_BOX, 0.80))
            entries.append(("black striped jacket", JACKET_BOX, 0.88))
        manifest[image_id] = entries
    return manifest


@pytest.fixture
def portrait_backends(portrait_manifest) -> AugmentBackends:
    return AugmentBackends(
        detector=ManifestDetector(portrait_manifest),
        embedder=HashEmbedder(),
        inpainter=MeanFillInpainter(),
        captioner=StubCaptioner(),
        rewriter=RuleRewriter(),
    )


# Expected folder counts for the portrait fixture: every image yields a
# base image and a face crop; each jacket concept survives reference
# filtering only on its own texture; the necklace is deleted, never cropped.
PORTRAIT_EXPECTED_FOLDERS = {
    "base": 7,
    "face": 7,
    "black leather jacket": 3,
    "black striped jacket": 2,
}
