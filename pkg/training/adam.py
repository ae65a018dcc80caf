from dataclasses import dataclass

import numpy as np

from ai.grad_engine import GradSet
from ai.sae_params import Array, SaeParams
from errors import DimensionError, NumericsError


@dataclass
class AdamState:
    first_moment: dict[str, Array]
    second_moment: dict[str, Array]
    t: int = 0

    @staticmethod
    def zeros_like(params: SaeParams) -> "AdamState":
        return AdamState(
            first_moment={name: np.zeros_like(value) for name, value in params.tensors()},
            second_moment={name: np.zeros_like(value) for name, value in params.tensors()},
        )


def adam_step(params: SaeParams, grads: GradSet, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
              weight_decay: float = 0.0) -> tuple[SaeParams, AdamState]:
    """Bias-corrected Adam update; returns new parameters and state, inputs are left untouched.

    A non-zero weight_decay is applied decoupled from the gradient.
    """
    if lr < 0:
        raise ValueError(f"Learning rate must be non-negative, got {lr}")
    t = state.t + 1
    correction1 = 1.0 - beta1 ** t
    correction2 = 1.0 - beta2 ** t

    updated, first, second = {}, {}, {}
    for name, value in params.tensors():
        grad = grads[name]
        if grad.shape != value.shape:
            raise DimensionError(f"Gradient {name} has shape {grad.shape}, expected {value.shape}")
        first[name] = beta1 * state.first_moment[name] + (1.0 - beta1) * grad
        second[name] = beta2 * state.second_moment[name] + (1.0 - beta2) * grad * grad
        step = lr * (first[name] / correction1) / (np.sqrt(second[name] / correction2) + eps)
        if weight_decay:
            step = step + lr * weight_decay * value
        new_value = value - step
        if not np.all(np.isfinite(new_value)):
            raise NumericsError(f"Adam update produced non-finite values in {name}", parameter=name)
        updated[name] = new_value
    return params.with_tensors(**updated), AdamState(first, second, t)
