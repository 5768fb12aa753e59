from .presets import (
    OPTIMIZER_LABEL,
    SCHEDULER_LABEL,
    TrainingConfig,
    config_with_overrides,
    preset_hyperparameters,
)
from .runs import (
    Checkpoint,
    MetricSpec,
    RunRegistry,
    RunState,
    RunStatus,
    build_metric_plan,
)
from .trainer import (
    CheckpointSaved,
    Failed,
    Finished,
    MockTrainer,
    StepCompleted,
    TrainerBackend,
)

__all__ = [
    "Checkpoint",
    "CheckpointSaved",
    "Failed",
    "Finished",
    "MetricSpec",
    "MockTrainer",
    "OPTIMIZER_LABEL",
    "RunRegistry",
    "RunState",
    "RunStatus",
    "SCHEDULER_LABEL",
    "StepCompleted",
    "TrainerBackend",
    "TrainingConfig",
    "build_metric_plan",
    "config_with_overrides",
    "preset_hyperparameters",
]
