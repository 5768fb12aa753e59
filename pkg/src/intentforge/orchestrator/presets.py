"""Per-domain training hyperparameter presets and the run configuration."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from ..errors import UnknownDomain, ValidationError
from ..intent_model import Domain

OPTIMIZER_LABEL = "8-bit AdamW"
SCHEDULER_LABEL = "cosine annealing with warm restarts"

DEFAULT_BATCH_SIZE = 4
DEFAULT_EPOCHS = 10
DEFAULT_SEED = 42


@dataclass(frozen=True)
class TrainingConfig:
    base_model_id: str = "stable-diffusion-v1-5"
    trigger_word: str = ""
    domain: Domain = Domain.OTHER
    unet_lr: float = 1e-4
    text_encoder_lr: float = 1e-5
    lora_dimension: int = 64
    lora_alpha: int = 32
    optimizer_name: str = OPTIMIZER_LABEL
    lr_scheduler_name: str = SCHEDULER_LABEL
    batch_size: int = DEFAULT_BATCH_SIZE
    epochs: int = DEFAULT_EPOCHS
    sample_every_steps: int = 0  # 0 = sample at every checkpoint
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.unet_lr <= 0 or self.text_encoder_lr <= 0:
            raise ValidationError("learning rates must be positive")
        if self.epochs < 1:
            raise ValidationError("epochs must be at least 1")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be at least 1")

    def to_dict(self) -> dict:
        return {
            "base_model_id": self.base_model_id,
            "trigger_word": self.trigger_word,
            "domain": self.domain.value,
            "unet_lr": self.unet_lr,
            "text_encoder_lr": self.text_encoder_lr,
            "lora_dimension": self.lora_dimension,
            "lora_alpha": self.lora_alpha,
            "optimizer_name": self.optimizer_name,
            "lr_scheduler_name": self.lr_scheduler_name,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "sample_every_steps": self.sample_every_steps,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainingConfig":
        data = dict(data)
        data["domain"] = Domain(data.get("domain", "other"))
        return cls(**data)


# (unet_lr, text_encoder_lr, lora_dimension, lora_alpha) per domain
_PRESETS: dict[Domain, tuple[float, float, int, int]] = {
    Domain.PAINTING: (1e-4, 1e-5, 64, 32),
    Domain.HUMAN_PORTRAIT: (1e-4, 5e-5, 128, 64),
    Domain.CHARACTER_2D: (1e-4, 1e-5, 32, 32),
    Domain.PRODUCT: (1e-4, 5e-5, 64, 32),
}


def preset_hyperparameters(domain: Domain | str) -> TrainingConfig:
    """The default hyperparameter row for one of the four known domains.

    Domain "other" has no preset and requires explicit user values.
    """
    domain = Domain(domain)
    if domain not in _PRESETS:
        raise UnknownDomain(
            f"no hyperparameter preset for domain {domain.value!r}; "
            "supply explicit values",
            {"domain": domain.value},
        )
    unet_lr, text_lr, dim, alpha = _PRESETS[domain]
    return TrainingConfig(
        domain=domain,
        unet_lr=unet_lr,
        text_encoder_lr=text_lr,
        lora_dimension=dim,
        lora_alpha=alpha,
    )


def config_with_overrides(config: TrainingConfig, **overrides) -> TrainingConfig:
    return replace(config, **overrides)
