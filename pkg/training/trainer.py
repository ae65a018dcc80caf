import functools
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from tqdm import tqdm

from ai.checkpoint import save_checkpoint
from ai.grad_engine import backward
from ai.sae_core import encode
from ai.sae_params import LossBreakdown, SaeParams, init_params
from ai.sae_variant import SaeVariant
from config.train_config import TrainConfig
from data.activation_dataset import ActivationDataset
from errors import ConfigError, NumericsError
from training.adam import AdamState, adam_step
from training.decoder_constraint import constrain_decoder, max_norm_deviation
from training.schedules import lambda_at, lr_at
from training.telemetry import TrainingTelemetry


@dataclass
class TrainReport:
    steps_completed: int
    epochs_started: int
    final_loss: dict | None = None
    max_decoder_norm_deviation: float | None = None
    records: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "steps_completed": self.steps_completed,
            "epochs_started": self.epochs_started,
            "final_loss": self.final_loss,
            "max_decoder_norm_deviation": self.max_decoder_norm_deviation,
        }


class BatchSampler:
    """Seeded per-epoch permutation; the partial batch at the end of an epoch is dropped."""

    def __init__(self, rows: int, batch_size: int, rng: np.random.Generator, reshuffle: bool = True):
        if batch_size > rows:
            raise ConfigError(f"batch_size {batch_size} exceeds the {rows} rows in the dataset")
        self.__rows = rows
        self.__batch_size = batch_size
        self.__rng = rng
        self.__reshuffle = reshuffle
        self.__order = rng.permutation(rows)
        self.__position = 0
        self.epochs = 1

    def next_indices(self) -> np.ndarray:
        if self.__position + self.__batch_size > self.__rows:
            if self.__reshuffle:
                self.__order = self.__rng.permutation(self.__rows)
            self.__position = 0
            self.epochs += 1
        indices = self.__order[self.__position:self.__position + self.__batch_size]
        self.__position += self.__batch_size
        return indices


class SaeTrainer:
    def __init__(self, config: TrainConfig, telemetry: TrainingTelemetry | None = None):
        self.logger = logging.getLogger(__name__)
        self.config = config
        self.telemetry = telemetry or TrainingTelemetry(sample_memory=False)
        init_seed, batch_seed = np.random.SeedSequence(config.seed).spawn(2)
        self.__init_rng = np.random.default_rng(init_seed)
        self.__batch_rng = np.random.default_rng(batch_seed)

    @property
    def constrained(self) -> bool:
        return self.config.variant == SaeVariant.BASELINE and self.config.constrain_decoder_norm

    def initial_params(self, n: int) -> SaeParams:
        return init_params(self.config.variant, n, self.config.latent_dim(n), self.__init_rng,
                           untied_magnitude=self.config.untied_magnitude)

    def train(self, data: ActivationDataset, checkpoint_path: str | Path | None = None) -> tuple[SaeParams, TrainReport]:
        config = self.config
        params = self.initial_params(data.n)
        report = TrainReport(steps_completed=0, epochs_started=0, records=self.telemetry.records)
        if config.steps == 0:
            self.logger.info("steps=0, returning initialized parameters")
            return params, report

        sampler = BatchSampler(data.rows, config.batch_size, self.__batch_rng, config.reshuffle_each_epoch)
        state = AdamState.zeros_like(params)
        last_good, last_good_step = params, 0
        max_deviation = 0.0 if self.constrained else None
        breakdown: LossBreakdown | None = None

        self.logger.info(f"Training {config.variant.value}: n={data.n}, m={params.m}, rows={data.rows}, "
                         f"steps={config.steps}, batch={config.batch_size}")
        for step in tqdm(range(config.steps), desc=f"train {config.variant.value}", unit="step",
                         disable=not self.logger.isEnabledFor(logging.INFO)):
            batch = data.data[sampler.next_indices()]
            lam = lambda_at(config, step)
            lr = lr_at(config, step)
            try:
                breakdown, grads = backward(params, batch, lam)
                update = functools.partial(adam_step, state=state, lr=lr, beta1=config.adam_beta1,
                                           beta2=config.adam_beta2, eps=config.adam_eps,
                                           weight_decay=config.weight_decay)
                if self.constrained:
                    params, state = constrain_decoder(params, grads, update)
                else:
                    params, state = update(params, grads)
            except NumericsError as e:
                self.__abort(e, step, last_good, last_good_step, checkpoint_path)

            deviation = None
            if self.constrained:
                deviation = max_norm_deviation(params)
                max_deviation = max(max_deviation, deviation)
            if step % config.log_every == 0 or step == config.steps - 1:
                l0_batch = float(np.mean(np.count_nonzero(encode(params, batch).h > 0, axis=1)))
                self.telemetry.record(step, breakdown, lr, lam, l0_batch, deviation)
            if (step + 1) % config.snapshot_every == 0:
                last_good, last_good_step = params, step + 1

        report.steps_completed = config.steps
        report.epochs_started = sampler.epochs
        report.final_loss = breakdown.to_dict()
        report.max_decoder_norm_deviation = max_deviation
        self.logger.info(f"Finished {config.steps} steps over {sampler.epochs} epochs, "
                         f"final loss {breakdown.total:.6f}")
        return params, report

    def __abort(self, error: NumericsError, step: int, last_good: SaeParams, last_good_step: int,
                checkpoint_path: str | Path | None):
        snapshot_path = None
        if checkpoint_path is not None:
            snapshot_path = f"{checkpoint_path}.last-good"
            save_checkpoint(last_good, snapshot_path)
        self.logger.error(f"Numerics failure at step {step} in {error.parameter}; "
                          f"last good parameters from step {last_good_step} at {snapshot_path}")
        raise NumericsError(f"Step {step}: {error}", parameter=error.parameter,
                            checkpoint_path=snapshot_path) from error


def train(config: TrainConfig, data: ActivationDataset, metrics_path: str | Path | None = None,
          checkpoint_path: str | Path | None = None, sample_memory: bool = True) -> tuple[SaeParams, TrainReport]:
    """Run the full training loop; deterministic for a given (config.seed, data)."""
    with TrainingTelemetry(metrics_path, sample_memory=sample_memory and metrics_path is not None) as telemetry:
        return SaeTrainer(config, telemetry).train(data, checkpoint_path)
