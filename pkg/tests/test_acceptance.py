"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line so the full gate is readable from the terminal output.

Every criterion is checked against an independent oracle or a published
constant at its stated tolerance, using only the deterministic mock
backends, so the whole suite runs in well under a minute.
"""

import base64
import functools
import io
import math
import random
import sys
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from intentforge.augmentation import (
    AugmentBackends,
    DetectionBox,
    HashEmbedder,
    ManifestDetector,
    MeanFillInpainter,
)
from intentforge.augmentation.pipeline import (
    apply_modify,
    build_dataset,
    delete_mask,
)
from intentforge.captioning import Caption, RuleRewriter, StubCaptioner, optimize_keep
from intentforge.errors import InvalidOperationForGranularity, UnknownDomain
from intentforge.intent_model import (
    BBox,
    ConceptIntent,
    Domain,
    Granularity,
    IntentSpecification,
    Operation,
    Region,
    parse_annotated_text,
    reconstruct_text,
    spec_to_json,
    validate_specification,
)
from intentforge.metrics import (
    HashScorer,
    KeywordPair,
    ReferenceSet,
    SampleBatch,
    controllability,
    stability,
)
from intentforge.orchestrator import MockTrainer, preset_hyperparameters
from intentforge.service import ServiceBackends, create_app
from tests.conftest import (
    ACCEPTANCE_RESULTS,
    ALL_IMAGES,
    JACKET_BOX,
    NECKLACE_BOX,
    PORTRAIT_EXPECTED_FOLDERS,
    make_portrait,
)


def criterion(label):
    """Record and print one PASS/FAIL line per criterion."""

    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                result = fn(*args, **kwargs)
            except BaseException:
                line = f"FAIL: {label}"
                ACCEPTANCE_RESULTS.append(line)
                print(line, file=sys.stderr)
                raise
            line = f"PASS: {label}"
            ACCEPTANCE_RESULTS.append(line)
            print(line, file=sys.stderr)
            return result

        return wrapper

    return decorate


class TableScorer:
    """Scorer backed by explicit lookup tables keyed on plain string ids."""

    name = "table"

    def __init__(self, pair_sims=None, text_sims=None):
        self.pair_sims = pair_sims or {}
        self.text_sims = text_sims or {}

    def sim(self, a, b):
        return self.pair_sims[(a, b)]

    def sim_text(self, image, text):
        return self.text_sims[(image, text)]


def stability_case(matrix):
    """matrix[j][i] = sim(image i, reference j)."""
    n, m = len(matrix), len(matrix[0])
    refs = ReferenceSet([f"r{j}" for j in range(n)], "concept")
    batch = SampleBatch([f"i{i}" for i in range(m)], prompt="p")
    table = {
        (f"i{i}", f"r{j}"): matrix[j][i] for j in range(n) for i in range(m)
    }
    return batch, refs, TableScorer(pair_sims=table)


def controllability_case(sims1, sims2):
    m = len(sims1)
    batch = SampleBatch([f"i{i}" for i in range(m)], prompt="p")
    pair = KeywordPair("long hair", "short hair", "hair")
    table = {}
    for i in range(m):
        table[(f"i{i}", "long hair")] = sims1[i]
        table[(f"i{i}", "short hair")] = sims2[i]
    return batch, pair, TableScorer(text_sims=table)


@criterion("metric oracle equivalence (1,000 random instances, 1e-9)")
def test_metric_oracle_equivalence():
    rng = random.Random(20240824)
    for _ in range(1000):
        n = rng.randint(1, 8)
        m = rng.randint(1, 8)

        matrix = [[rng.uniform(-5, 5) for _ in range(m)] for _ in range(n)]
        batch, refs, scorer = stability_case(matrix)
        oracle = sum(
            matrix[j][i] for j in range(n) for i in range(m)
        ) / (n * m)
        assert abs(stability(batch, refs, scorer) - oracle) < 1e-9

        sims1 = [rng.uniform(-5, 5) for _ in range(m)]
        sims2 = [rng.uniform(-5, 5) for _ in range(m)]
        batch, pair, scorer = controllability_case(sims1, sims2)
        oracle = sum(
            math.exp(s1) / (math.exp(s1) + math.exp(s2))
            for s1, s2 in zip(sims1, sims2)
        ) / m
        assert abs(controllability(batch, pair, scorer) - oracle) < 1e-9


@criterion("controllability symmetry, swap and shift invariance (1e-12)")
def test_controllability_symmetry():
    rng = random.Random(7)
    for _ in range(200):
        m = rng.randint(1, 8)
        sims1 = [rng.uniform(-5, 5) for _ in range(m)]
        sims2 = [rng.uniform(-5, 5) for _ in range(m)]

        # equal similarities -> exactly one half
        batch, pair, scorer = controllability_case(sims1, sims1)
        assert abs(controllability(batch, pair, scorer) - 0.5) < 1e-12

        # swapping intended/opposing complements the score
        batch, pair, scorer = controllability_case(sims1, sims2)
        forward = controllability(batch, pair, scorer)
        batch, pair, scorer = controllability_case(sims2, sims1)
        assert abs(forward - (1.0 - controllability(batch, pair, scorer))) < 1e-12

        # adding a constant to both similarities changes nothing
        shift = rng.uniform(-3, 3)
        batch, pair, scorer = controllability_case(
            [s + shift for s in sims1], [s + shift for s in sims2]
        )
        assert abs(forward - controllability(batch, pair, scorer)) < 1e-12


@criterion("preset fidelity (4 domains, 12 cells, optimizer/scheduler labels)")
def test_preset_fidelity():
    expected = {
        Domain.PAINTING: (1e-4, 1e-5, 64, 32),
        Domain.HUMAN_PORTRAIT: (1e-4, 5e-5, 128, 64),
        Domain.CHARACTER_2D: (1e-4, 1e-5, 32, 32),
        Domain.PRODUCT: (1e-4, 5e-5, 64, 32),
    }
    for domain, (unet_lr, text_lr, dim, alpha) in expected.items():
        config = preset_hyperparameters(domain)
        assert config.unet_lr == unet_lr
        assert config.text_encoder_lr == text_lr
        assert config.lora_dimension == dim
        assert config.lora_alpha == alpha
        assert config.optimizer_name == "8-bit AdamW"
        assert config.lr_scheduler_name == "cosine annealing with warm restarts"
    with pytest.raises(UnknownDomain):
        preset_hyperparameters(Domain.OTHER)


@criterion("annotation grammar round-trip (500 texts) and operation matrix 7/2")
def test_grammar_and_validation_matrix():
    rng = random.Random(99)
    words = ["keep", "the", "face", "jacket", "remove", "necklace",
             "modify", "into", "a", "striped", "one", "background"]
    regions = [
        Region(i, f"img{i}", BBox(0.1, 0.1, 0.5, 0.5), color_index=i % 8)
        for i in range(1, 9)
    ]
    for _ in range(500):
        pieces = []
        for _ in range(rng.randint(1, 12)):
            kind = rng.random()
            if kind < 0.25:
                pieces.append(f"[{rng.randint(1, 8)}]")
            elif kind < 0.35:
                pieces.append(f"[{rng.choice(words)}]")  # prose, no digits
            else:
                pieces.append(rng.choice(words))
        text = " ".join(pieces)
        parsed = parse_annotated_text(text, regions)
        assert reconstruct_text(parsed) == text
        for link in parsed.links:
            assert text[link.span[0]:link.span[1]] == f"[{link.region_id}]"

    outcomes = {}
    for granularity in Granularity:
        for operation in Operation:
            spec = IntentSpecification(
                domain=Domain.PAINTING,
                trigger_word="T",
                concepts=(ConceptIntent("thing", granularity, operation),),
            )
            try:
                validate_specification(spec)
                outcomes[(granularity, operation)] = "allowed"
            except InvalidOperationForGranularity:
                outcomes[(granularity, operation)] = "rejected"
    rejected = {k for k, v in outcomes.items() if v == "rejected"}
    assert len(outcomes) == 9
    assert rejected == {
        (Granularity.IMAGERY, Operation.MODIFY),
        (Granularity.ATTRIBUTE, Operation.DELETE),
    }


@criterion("modify threshold rule (500 boxes, crop iff area < 0.40, boundary excluded)")
def test_modify_threshold_rule():
    rng = random.Random(5)
    pixels = np.zeros((1000, 1000, 3), dtype=np.uint8)
    for _ in range(500):
        w = rng.uniform(0.05, 0.95)
        h = rng.uniform(0.05, 0.95)
        x0 = rng.uniform(0, 1 - w)
        y0 = rng.uniform(0, 1 - h)
        box = DetectionBox("img", "c", BBox(x0, y0, x0 + w, y0 + h), 0.9)
        record = apply_modify(pixels, box, min_crop_px=1)
        assert (record is not None) == (box.bbox.area < 0.40)
    boundary = DetectionBox("img", "c", BBox(0.0, 0.0, 0.8, 0.5), 0.9)
    assert boundary.bbox.area == pytest.approx(0.40)
    assert apply_modify(pixels, boundary, min_crop_px=1) is None


@criterion("augmentation end-to-end: folder counts, masked delete diffs, sidecars")
def test_augmentation_end_to_end(tmp_path, portrait_images, portrait_regions,
                                 portrait_spec, portrait_backends):
    root = tmp_path / "dataset"
    dataset = build_dataset(
        portrait_images, portrait_spec, portrait_backends, root,
        regions=portrait_regions,
    )
    assert dataset.folders == PORTRAIT_EXPECTED_FOLDERS

    pngs = sorted(root.rglob("*.png"))
    sidecars = sorted(root.rglob("*.txt"))
    assert len(pngs) == len(dataset.items) == sum(dataset.folders.values())
    assert len(sidecars) == len(pngs)
    assert {p.with_suffix(".txt") for p in pngs} == set(sidecars)

    # delete regions: changed only inside the padded necklace mask
    for index, image in enumerate(sorted(portrait_images,
                                         key=lambda i: i.image_id)):
        base = np.asarray(
            Image.open(root / "base" / f"{index:04d}.png").convert("RGB")
        )
        necklace = DetectionBox(image.image_id, "necklace", NECKLACE_BOX, 0.9)
        mask = delete_mask(image.pixels, [necklace])
        assert np.array_equal(base[~mask], image.pixels[~mask])
        assert not np.array_equal(base[mask], image.pixels[mask])


@criterion("caption keep optimization golden string")
def test_caption_keep_golden():
    initial = (
        "superhero landing, a woman in a black widow suit crouches on the "
        "floor, one hand propped up on the floor, looking at the camera, "
        "with a door in the background"
    )
    concept = ConceptIntent(
        "superhero landing", Granularity.IMAGERY, Operation.KEEP
    )
    rewriter = RuleRewriter({
        "superhero landing": [
            "crouches on the floor",
            "one hand propped up on the floor",
        ]
    })
    out = optimize_keep(Caption(initial, "superhero landing"), concept, rewriter)
    assert out.text == (
        "superhero landing, a woman in a black widow suit, "
        "looking at the camera, with a door in the background"
    )


# --- service-level helpers -------------------------------------------------


def _png_bytes(pixels) -> bytes:
    buffer = io.BytesIO()
    Image.fromarray(pixels).save(buffer, format="PNG")
    return buffer.getvalue()


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def _service_backends(portrait_manifest) -> ServiceBackends:
    manifest = {
        f"img{i:04d}": portrait_manifest[name]
        for i, name in enumerate(ALL_IMAGES)
    }
    return ServiceBackends(
        augment=AugmentBackends(
            detector=ManifestDetector(manifest),
            embedder=HashEmbedder(),
            inpainter=MeanFillInpainter(),
            captioner=StubCaptioner(),
            rewriter=RuleRewriter(),
        ),
        trainer=MockTrainer(),
        scorer=HashScorer(),
        transformers=ServiceBackends.default().transformers,
    )


def _prepare_project(client, portrait_spec) -> str:
    project = client.post("/projects", json={"name": "demo"}).json()["project_id"]
    files = [
        {"filename": f"{name}.png",
         "content_base64": _b64(_png_bytes(make_portrait(name).pixels))}
        for name in ALL_IMAGES
    ]
    response = client.post(f"/projects/{project}/images", json={"files": files})
    assert response.status_code == 200, response.text
    regions = [
        {"region_id": 1, "image_id": "img0000",
         "bbox": JACKET_BOX.to_list(), "color_index": 0},
        {"region_id": 2, "image_id": "img0003",
         "bbox": JACKET_BOX.to_list(), "color_index": 1},
    ]
    response = client.post(
        f"/projects/{project}/intent",
        json={"text": spec_to_json(portrait_spec), "regions": regions,
              "backend": "rule"},
    )
    assert response.status_code == 200, response.text
    return project


def _wait_finished(client, run_id, timeout=45.0) -> dict:
    deadline = time.time() + timeout
    while time.time() < deadline:
        status = client.get(f"/runs/{run_id}").json()
        if status["status"] in ("finished", "failed", "stopped"):
            return status
        time.sleep(0.05)
    raise AssertionError("run did not finish in time")


def _run_workflow(data_root, portrait_manifest, portrait_spec):
    """Full upload -> intent -> preprocess -> train workflow; returns the
    metric files (name -> bytes) and cover images (step order) of the run."""
    app = create_app(data_root, _service_backends(portrait_manifest))
    with TestClient(app) as client:
        project = _prepare_project(client, portrait_spec)
        response = client.post(f"/projects/{project}/preprocess", json={})
        assert response.status_code == 200, response.text

        response = client.post(
            f"/projects/{project}/train",
            json={"epochs": 10, "batch_size": 2, "seed": 17},
        )
        assert response.status_code == 200, response.text
        run_id = response.json()["run_id"]
        status = _wait_finished(client, run_id)
        assert status["status"] == "finished"
        assert len(status["checkpoint_steps"]) == 10

        events = client.get(f"/runs/{run_id}/events?after_step=0").json()
        by_metric = {}
        for event in events["events"]:
            by_metric.setdefault(event["metric_name"], []).append(event["step"])
        for steps in by_metric.values():
            assert len(steps) == 10
            assert all(a < b for a, b in zip(steps, steps[1:]))

        metrics_dir = data_root / "runs" / run_id / "metrics"
        metric_files = {
            path.name: path.read_bytes()
            for path in sorted(metrics_dir.glob("*.jsonl"))
        }
        covers = [
            client.get(model["cover_url"]).content
            for model in sorted(
                client.get(f"/projects/{project}/models").json()["models"],
                key=lambda m: m["step"],
            )
        ]
    return metric_files, covers


@criterion("deterministic end-to-end run: 10 checkpoints, bit-identical repeat, <60s")
def test_deterministic_end_to_end(tmp_path, portrait_manifest, portrait_spec):
    started = time.time()
    first = _run_workflow(tmp_path / "a", portrait_manifest, portrait_spec)
    second = _run_workflow(tmp_path / "b", portrait_manifest, portrait_spec)
    elapsed = time.time() - started

    assert first[0].keys() == second[0].keys()
    for name in first[0]:
        assert first[0][name] == second[0][name], name
    assert len(first[1]) == len(second[1]) == 10
    for a, b in zip(first[1], second[1]):
        assert a == b
    assert elapsed < 60.0, f"workflow took {elapsed:.1f}s"


@criterion("API conformance: strict workflow schemas and structured error bodies")
def test_api_conformance(tmp_path, portrait_manifest, portrait_spec):
    app = create_app(tmp_path / "data", _service_backends(portrait_manifest))
    with TestClient(app) as client:
        # error paths before any state exists
        cases = [
            (client.get("/projects/nope"), 404, "unknown_project"),
            (client.get("/runs/nope"), 404, "unknown_run"),
            (client.post("/projects", json={"nome": "x"}), 422,
             "schema_validation"),
        ]

        project = _prepare_project(client, portrait_spec)
        cases += [
            (client.post("/projects", json={"name": "demo"}), 409,
             "duplicate_name"),
            (client.post(
                f"/projects/{project}/images",
                json={"files": [{"filename": "bad.png",
                                 "content_base64": _b64(b"junk")}]},
            ), 415, "unsupported_format"),
            (client.post(
                f"/projects/{project}/intent",
                json={"text": "remove the necklace [9]", "regions": []},
            ), 422, "dangling_reference"),
            (client.post(
                f"/projects/{project}/intent",
                json={"text": "keep the [face 1]", "regions": []},
            ), 422, "malformed_bracket"),
            (client.post(f"/projects/{project}/train", json={}), 409,
             "dataset_empty"),
        ]

        bad_spec = client.get(f"/projects/{project}/spec").json()
        bad_spec["concepts"].append({
            "name": "tint", "granularity": "attribute", "operation": "delete",
            "region_ids": [], "opposing_keywords": None,
        })
        cases.append((
            client.put(f"/projects/{project}/spec", json=bad_spec),
            422, "invalid_operation_for_granularity",
        ))

        # happy-path workflow
        response = client.post(f"/projects/{project}/preprocess", json={})
        assert response.status_code == 200, response.text
        captions = client.get(f"/projects/{project}/captions").json()["captions"]
        assert captions and all(
            set(c) >= {"path", "caption", "highlights"} for c in captions
        )

        response = client.post(
            f"/projects/{project}/train",
            json={"epochs": 2, "batch_size": 2, "seed": 1},
        )
        assert response.status_code == 200, response.text
        run_id = response.json()["run_id"]
        status = _wait_finished(client, run_id)
        assert status["status"] == "finished"
        step = status["checkpoint_steps"][-1]

        models = client.get(f"/projects/{project}/models").json()["models"]
        for model in models:
            values = [s["value"] for s in model["intent_scores"]]
            assert values == sorted(values, reverse=True)

        response = client.post(
            f"/runs/{run_id}/checkpoints/{step}/evaluate", json={}
        )
        assert response.status_code == 200
        response = client.post(
            f"/runs/{run_id}/checkpoints/{step}/generate",
            json={"prompt": "Vincent", "seed": 2},
        )
        assert response.status_code == 200
        assert response.json()["image_base64"]

        cases += [
            (client.post(f"/runs/{run_id}/checkpoints/99999/evaluate",
                         json={}), 404, "unknown_checkpoint"),
            (client.post(f"/runs/{run_id}/stop"), 409, "invalid_state"),
            (client.post(f"/projects/{project}/train", json={"epochz": 1}),
             422, "schema_validation"),
        ]

        for response, expected_status, expected_code in cases:
            assert response.status_code == expected_status, response.text
            body = response.json()
            assert set(body) == {"code", "message", "detail"}, body
            assert body["code"] == expected_code
