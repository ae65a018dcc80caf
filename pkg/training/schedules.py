"""Piecewise-linear learning-rate and sparsity-coefficient schedules.

Ramps are evaluated at (s + 1) / ramp_len so step 0 already takes one ramp
increment instead of a zero-size step.
"""
from config.train_config import TrainConfig
from errors import OutOfRangeError


def _ramp_length(steps: int, fraction: float) -> int:
    return int(round(fraction * steps))


def _check_step(config: TrainConfig, step: int):
    if not 0 <= step < config.steps:
        raise OutOfRangeError(f"Step {step} outside [0, {config.steps})")


def lr_at(config: TrainConfig, step: int) -> float:
    """Warm up over the first lr_warmup_frac of steps, decay to 0 over the last lr_warmdown_frac."""
    _check_step(config, step)
    warmup = _ramp_length(config.steps, config.lr_warmup_frac)
    warmdown = _ramp_length(config.steps, config.lr_warmdown_frac)
    if warmup > 0 and step < warmup:
        return config.lr_max * (step + 1) / warmup
    if warmdown > 0 and step >= config.steps - warmdown:
        return config.lr_max * (config.steps - step) / warmdown
    return config.lr_max


def lambda_at(config: TrainConfig, step: int) -> float:
    _check_step(config, step)
    warmup = _ramp_length(config.steps, config.l1_warmup_frac)
    if warmup > 0 and step < warmup:
        return config.lambda_max * (step + 1) / warmup
    return config.lambda_max
