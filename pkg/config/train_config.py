from pathlib import Path

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ai.sae_variant import SaeVariant
from config.config import Config
from errors import ConfigError


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    variant: SaeVariant = SaeVariant.SAE_RAD
    expansion_factor: int = Field(default=Config.EXPANSION_FACTOR, ge=1)
    lambda_max: float = Field(default=Config.LAMBDA_MAX, ge=0.0)
    lr_max: float = Field(default=Config.LR_MAX, ge=0.0)
    steps: int = Field(default=Config.STEPS, ge=0)
    batch_size: int = Field(default=Config.BATCH_SIZE, ge=1)
    lr_warmup_frac: float = Field(default=Config.LR_WARMUP_FRAC, ge=0.0, le=1.0)
    lr_warmdown_frac: float = Field(default=Config.LR_WARMDOWN_FRAC, ge=0.0, le=1.0)
    l1_warmup_frac: float = Field(default=Config.L1_WARMUP_FRAC, ge=0.0, le=1.0)
    adam_beta1: float = Field(default=Config.ADAM_BETA1, ge=0.0, lt=1.0)
    adam_beta2: float = Field(default=Config.ADAM_BETA2, ge=0.0, lt=1.0)
    adam_eps: float = Field(default=Config.ADAM_EPS, gt=0.0)
    weight_decay: float = Field(default=0.0, ge=0.0)
    seed: int = 0

    constrain_decoder_norm: bool = True
    untied_magnitude: bool = False
    reshuffle_each_epoch: bool = True
    log_every: int = Field(default=100, ge=1)
    snapshot_every: int = Field(default=1000, ge=1)

    @model_validator(mode="after")
    def check_schedule(self):
        if self.lr_warmup_frac + self.lr_warmdown_frac > 1.0:
            raise ValueError("lr_warmup_frac + lr_warmdown_frac must not exceed 1")
        if self.untied_magnitude and not self.variant.is_gated:
            raise ValueError(f"untied_magnitude requires a gated variant, got {self.variant.value}")
        return self

    @staticmethod
    def from_file(path: str | Path, **overrides) -> "TrainConfig":
        with open(path, "r") as file:
            # JSON is a YAML subset, so one loader serves both
            raw = yaml.safe_load(file) or {}
        if not isinstance(raw, dict):
            raise ConfigError(f"Config file {path} must contain a mapping")
        raw.update({key: value for key, value in overrides.items() if value is not None})
        return TrainConfig.parse(raw)

    @staticmethod
    def parse(raw: dict) -> "TrainConfig":
        try:
            return TrainConfig.model_validate(raw)
        except ValidationError as e:
            raise ConfigError(f"Invalid training config: {e}") from e

    def latent_dim(self, n: int) -> int:
        return self.expansion_factor * n
