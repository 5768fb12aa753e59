import json
from pathlib import Path

import numpy as np
import pytest

from intentforge.augmentation import build_dataset
from intentforge.errors import (
    DatasetEmpty,
    InvalidState,
    UnknownCheckpoint,
    UnknownDomain,
    ValidationError,
)
from intentforge.intent_model import (
    ConceptIntent,
    Domain,
    Granularity,
    IntentSpecification,
    Operation,
)
from intentforge.metrics import HashScorer, KeywordPair
from intentforge.orchestrator import (
    MetricSpec,
    MockTrainer,
    OPTIMIZER_LABEL,
    RunRegistry,
    RunStatus,
    SCHEDULER_LABEL,
    TrainingConfig,
    config_with_overrides,
    preset_hyperparameters,
)
from intentforge.transformer import recommend_prompts


class TestPresets:
    @pytest.mark.parametrize(
        "domain,unet_lr,text_lr,dim,alpha",
        [
            (Domain.PAINTING, 1e-4, 1e-5, 64, 32),
            (Domain.HUMAN_PORTRAIT, 1e-4, 5e-5, 128, 64),
            (Domain.CHARACTER_2D, 1e-4, 1e-5, 32, 32),
            (Domain.PRODUCT, 1e-4, 5e-5, 64, 32),
        ],
    )
    def test_table_rows(self, domain, unet_lr, text_lr, dim, alpha):
        config = preset_hyperparameters(domain)
        assert config.unet_lr == unet_lr
        assert config.text_encoder_lr == text_lr
        assert config.lora_dimension == dim
        assert config.lora_alpha == alpha
        assert config.optimizer_name == OPTIMIZER_LABEL
        assert config.lr_scheduler_name == SCHEDULER_LABEL

    def test_other_domain_rejected(self):
        with pytest.raises(UnknownDomain):
            preset_hyperparameters(Domain.OTHER)

    def test_labels(self):
        assert OPTIMIZER_LABEL == "8-bit AdamW"
        assert SCHEDULER_LABEL == "cosine annealing with warm restarts"

    def test_config_validation(self):
        with pytest.raises(ValidationError):
            TrainingConfig(unet_lr=0.0)
        with pytest.raises(ValidationError):
            TrainingConfig(epochs=0)


@pytest.fixture
def portrait_dataset(tmp_path, portrait_images, portrait_regions,
                     portrait_spec, portrait_backends):
    return build_dataset(
        portrait_images, portrait_spec, portrait_backends,
        tmp_path / "dataset", regions=portrait_regions,
    )


def make_registry(tmp_path, name="runs", epoch_delay=0.0) -> RunRegistry:
    return RunRegistry(tmp_path / name, MockTrainer(epoch_delay=epoch_delay),
                       HashScorer())


def portrait_config() -> TrainingConfig:
    return config_with_overrides(
        preset_hyperparameters(Domain.HUMAN_PORTRAIT),
        trigger_word="Vincent", epochs=3, batch_size=2, seed=7,
    )


class TestRunLifecycle:
    def test_start_and_finish(self, tmp_path, portrait_dataset, portrait_spec):
        registry = make_registry(tmp_path)
        plan = recommend_prompts(portrait_spec)
        run = registry.start_run(
            portrait_dataset, portrait_spec, portrait_config(), plan,
            run_id="r1",
        )
        assert run.status in (RunStatus.TRAINING, RunStatus.FINISHED)
        run.wait(30)
        assert run.status is RunStatus.FINISHED
        assert len(run.checkpoints) == 3

    def test_empty_dataset_rejected(self, tmp_path, portrait_spec):
        from intentforge.augmentation import ProcessedDataset

        registry = make_registry(tmp_path)
        with pytest.raises(DatasetEmpty):
            registry.start_run(
                ProcessedDataset(root_path=str(tmp_path)), portrait_spec,
                portrait_config(), recommend_prompts(portrait_spec),
            )

    def test_single_start_per_run_id(self, tmp_path, portrait_dataset,
                                     portrait_spec):
        registry = make_registry(tmp_path)
        plan = recommend_prompts(portrait_spec)
        run = registry.start_run(
            portrait_dataset, portrait_spec, portrait_config(), plan,
            run_id="r1",
        )
        run.wait(30)
        with pytest.raises(InvalidState):
            registry.start_run(
                portrait_dataset, portrait_spec, portrait_config(), plan,
                run_id="r1",
            )

    def test_stop_then_checkpoints_remain(self, tmp_path, portrait_dataset,
                                          portrait_spec):
        registry = make_registry(tmp_path, epoch_delay=0.15)
        plan = recommend_prompts(portrait_spec)
        config = config_with_overrides(portrait_config(), epochs=50)
        run = registry.start_run(
            portrait_dataset, portrait_spec, config, plan, run_id="r1"
        )
        import time

        time.sleep(0.5)
        stopped = registry.stop_run("r1")
        assert stopped.status is RunStatus.STOPPED
        checkpoints = list(stopped.checkpoints)
        assert checkpoints == stopped.checkpoints
        with pytest.raises(InvalidState):
            registry.stop_run("r1")

    def test_stop_finished_run_invalid(self, tmp_path, portrait_dataset,
                                       portrait_spec):
        registry = make_registry(tmp_path)
        run = registry.start_run(
            portrait_dataset, portrait_spec, portrait_config(),
            recommend_prompts(portrait_spec), run_id="r1",
        )
        run.wait(30)
        with pytest.raises(InvalidState):
            registry.stop_run("r1")


class TestCheckpointMetrics:
    def test_metric_point_counts(self, tmp_path, portrait_dataset,
                                 portrait_spec):
        registry = make_registry(tmp_path)
        run = registry.start_run(
            portrait_dataset, portrait_spec, portrait_config(),
            recommend_prompts(portrait_spec), run_id="r1",
        )
        run.wait(30)
        # overall + face stability + 2 jacket stabilities + 2 controllabilities
        assert len(run.series) == 6
        for series in run.series.values():
            steps = [s for s, _ in series.points]
            assert len(steps) == 3
            assert steps == sorted(steps)
            assert len(set(steps)) == 3

    def test_keep_plus_uncropped_modify_yields_three_series(
        self, tmp_path, portrait_images, portrait_backends,
    ):
        # modify box covers >= 40% of the image, so no crops and therefore
        # no per-concept stability series for it: overall + keep stability
        # + modify controllability
        from intentforge.augmentation import ManifestDetector
        from intentforge.intent_model import BBox
        from dataclasses import replace

        spec = IntentSpecification(
            Domain.HUMAN_PORTRAIT, "Vincent",
            (
                ConceptIntent("face", Granularity.INSTANCE, Operation.KEEP),
                ConceptIntent(
                    "outfit", Granularity.INSTANCE, Operation.MODIFY,
                    opposing_keywords=("bright outfit", "dark outfit"),
                ),
            ),
        )
        manifest = {
            img.image_id: [
                ("face", BBox(0.30, 0.10, 0.70, 0.40), 0.95),
                ("outfit", BBox(0.05, 0.05, 0.95, 0.95), 0.9),
            ]
            for img in portrait_images
        }
        backends = replace(
            portrait_backends, detector=ManifestDetector(manifest)
        )
        dataset = build_dataset(
            portrait_images, spec, backends, tmp_path / "ds2"
        )
        assert "outfit" not in dataset.folders

        registry = make_registry(tmp_path)
        config = config_with_overrides(portrait_config(), epochs=1)
        run = registry.start_run(
            dataset, spec, config, recommend_prompts(spec), run_id="r2"
        )
        run.wait(30)
        assert set(run.series) == {
            "stability:overall", "stability:face", "controllability:outfit",
        }
        checkpoint = run.checkpoints[0]
        assert len(checkpoint.intent_scores) == 3

    def test_scores_ranked_descending(self, tmp_path, portrait_dataset,
                                      portrait_spec):
        registry = make_registry(tmp_path)
        run = registry.start_run(
            portrait_dataset, portrait_spec, portrait_config(),
            recommend_prompts(portrait_spec), run_id="r1",
        )
        run.wait(30)
        for checkpoint in run.checkpoints:
            values = [v for _, v in checkpoint.intent_scores]
            assert values == sorted(values, reverse=True)

    def test_cover_is_first_sample_of_first_prompt(
        self, tmp_path, portrait_dataset, portrait_spec,
    ):
        registry = make_registry(tmp_path)
        run = registry.start_run(
            portrait_dataset, portrait_spec, portrait_config(),
            recommend_prompts(portrait_spec), run_id="r1",
        )
        run.wait(30)
        for checkpoint in run.checkpoints:
            cover = Path(checkpoint.cover_image_path)
            assert cover.exists()
            assert cover.name == "0.png"


class TestDeterminism:
    def test_identical_runs_bit_identical(self, tmp_path, portrait_dataset,
                                          portrait_spec):
        plan = recommend_prompts(portrait_spec)
        outputs = []
        for name in ("a", "b"):
            registry = make_registry(tmp_path, name=name)
            run = registry.start_run(
                portrait_dataset, portrait_spec, portrait_config(), plan,
                run_id="run",
            )
            run.wait(30)
            metric_bytes = {
                p.name: p.read_bytes()
                for p in sorted((run.root / "metrics").glob("*.jsonl"))
            }
            covers = [Path(c.cover_image_path).read_bytes()
                      for c in run.checkpoints]
            outputs.append((metric_bytes, covers))
        assert outputs[0] == outputs[1]


class TestEvaluateAndGenerate:
    @pytest.fixture
    def finished_run(self, tmp_path, portrait_dataset, portrait_spec):
        registry = make_registry(tmp_path)
        run = registry.start_run(
            portrait_dataset, portrait_spec, portrait_config(),
            recommend_prompts(portrait_spec), run_id="r1",
        )
        run.wait(30)
        return registry, run

    def test_evaluate_returns_images_and_ranked_scores(self, finished_run):
        registry, run = finished_run
        step = run.checkpoints[0].step
        images, scores = registry.evaluate_checkpoint("r1", step)
        assert len(images) == run.config.batch_size
        values = [v for _, v in scores]
        assert values == sorted(values, reverse=True)

    def test_evaluate_empty_override(self, finished_run):
        registry, run = finished_run
        step = run.checkpoints[0].step
        images, scores = registry.evaluate_checkpoint(
            "r1", step, metric_overrides=[]
        )
        assert images and scores == []

    def test_evaluate_added_metric(self, finished_run):
        registry, run = finished_run
        step = run.checkpoints[0].step
        extra = MetricSpec(
            kind="controllability",
            metric_name="controllability:hair length",
            concept_name="hair length",
            prompt="Vincent, hair",
            keyword_pair=KeywordPair("long hair", "short hair", "hair length"),
        )
        _, scores = registry.evaluate_checkpoint(
            "r1", step, metric_overrides=[extra]
        )
        assert [name for name, _ in scores] == ["controllability:hair length"]

    def test_unknown_checkpoint(self, finished_run):
        registry, _ = finished_run
        with pytest.raises(UnknownCheckpoint):
            registry.evaluate_checkpoint("r1", 99999)

    def test_generate_deterministic(self, finished_run):
        registry, run = finished_run
        step = run.checkpoints[-1].step
        a = registry.generate("r1", step, "Vincent", 5)
        b = registry.generate("r1", step, "Vincent", 5)
        assert np.array_equal(a, b)


class TestRunManifest:
    def test_manifest_snapshot(self, tmp_path, portrait_dataset,
                               portrait_spec):
        registry = make_registry(tmp_path)
        run = registry.start_run(
            portrait_dataset, portrait_spec, portrait_config(),
            recommend_prompts(portrait_spec), run_id="r1",
        )
        run.wait(30)
        manifest = json.loads((run.root / "manifest.json").read_text())
        assert manifest["config"]["trigger_word"] == "Vincent"
        assert manifest["spec"]["domain"] == "human_portrait"
        assert manifest["prompt_plan"]["monitoring_prompts"][0] == "Vincent"
