import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ai.sae_core import as_batch, get_model, loss
from ai.sae_model import LOSS_TERMS
from ai.sae_params import Array, LossBreakdown, SaeParams, init_params
from ai.sae_variant import SaeVariant
from config.app_config import AppConfig
from config.config import Config
from errors import NumericsError

logger = logging.getLogger(__name__)


@dataclass
class GradSet:
    tensors: dict[str, Array]
    batch_size: int

    def __getitem__(self, name: str) -> Array:
        return self.tensors[name]

    def names(self) -> list[str]:
        return list(self.tensors)

    def with_tensor(self, name: str, value: Array) -> "GradSet":
        return GradSet({**self.tensors, name: value}, self.batch_size)


def _chunks(X: Array, rows: int) -> list[Array]:
    return [X[start:start + rows] for start in range(0, X.shape[0], rows)]


def _tree_reduce(parts: list):
    """Pairwise sum in a fixed order, independent of how the parts were computed."""
    while len(parts) > 1:
        paired = [_add(parts[i], parts[i + 1]) for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            paired.append(parts[-1])
        parts = paired
    return parts[0]


def _add(left, right):
    (left_sums, left_grads), (right_sums, right_grads) = left, right
    sums = tuple(a + b for a, b in zip(left_sums, right_sums))
    return sums, {name: left_grads[name] + right_grads[name] for name in left_grads}


def backward(params: SaeParams, batch: Array, lam: float,
             terms: tuple[str, ...] = LOSS_TERMS) -> tuple[LossBreakdown, GradSet]:
    """Batch-mean loss and analytic gradients of the total loss.

    The batch is cut into fixed-size chunks; chunks may run on worker threads
    but are always reduced in the same order, so results do not depend on the
    thread count.
    """
    if lam < 0:
        raise ValueError(f"lambda must be non-negative, got {lam}")
    X, _ = as_batch(batch)
    model = get_model(params.variant)
    model.check_input(params, X)

    chunks = _chunks(X, Config.CHUNK_ROWS)
    if AppConfig.threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=AppConfig.threads) as executor:
            parts = list(executor.map(lambda chunk: model.backward_sums(params, chunk, lam, terms), chunks))
    else:
        parts = [model.backward_sums(params, chunk, lam, terms) for chunk in chunks]
    (reconstruct, sparsity, aux), sums = _tree_reduce(parts)

    size = X.shape[0]
    grads = {}
    for name in params.names():
        grad = sums[name] / size
        if not np.all(np.isfinite(grad)):
            raise NumericsError(f"Gradient of {name} is not finite", parameter=name)
        grads[name] = grad
    breakdown = LossBreakdown(reconstruct=reconstruct / size, sparsity=sparsity / size, aux=aux / size, lambda_=lam)
    return breakdown, GradSet(grads, size)


def finite_diff_grad(params: SaeParams, batch: Array, lam: float, step: float = Config.GRAD_CHECK_STEP) -> GradSet:
    """Central-difference gradient of the total loss for every parameter entry.

    The aux term's decoder is pinned at the unperturbed parameters, so a
    stop-gradient decoder (Gated) is differentiated as the contract states.
    """
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    X, _ = as_batch(batch)
    frozen = params.copy()
    grads = {}
    for name, tensor in params.tensors():
        grad = np.zeros_like(tensor)
        for index in np.ndindex(tensor.shape):
            grad[index] = _central_difference(params, X, lam, step, name, index, frozen)
        grads[name] = grad
    return GradSet(grads, X.shape[0])


def _central_difference(params, X, lam, step, name, index, frozen) -> float:
    probe = params.copy()
    tensor = getattr(probe, name)
    original = tensor[index]
    tensor[index] = original + step
    upper = loss(probe, X, lam, frozen_decoder=frozen).total
    tensor[index] = original - step
    lower = loss(probe, X, lam, frozen_decoder=frozen).total
    return (upper - lower) / (2.0 * step)


def relative_errors(analytic: GradSet, numeric: GradSet,
                    floor: float = Config.GRAD_CHECK_REL_FLOOR) -> dict[str, float]:
    """Worst |a - f| / max(|a|, |f|, floor) per parameter."""
    worst = {}
    for name in analytic.names():
        a, f = analytic[name], numeric[name]
        scale = np.maximum(np.maximum(np.abs(a), np.abs(f)), floor)
        worst[name] = float(np.max(np.abs(a - f) / scale)) if a.size else 0.0
    return worst


def random_instance(variant: SaeVariant, n: int, m: int, batch: int, rng: np.random.Generator,
                    margin: float = Config.GRAD_CHECK_KINK_MARGIN,
                    untied_magnitude: bool = False) -> tuple[SaeParams, Array]:
    """Random parameters and batch with every pre-activation at least `margin` from 0."""
    while True:
        params = init_params(variant, n, m, rng, untied_magnitude=untied_magnitude)
        perturbed = {
            "W_gate": params.W_gate + 0.3 * rng.standard_normal(params.W_gate.shape),
            "b_gate": 0.2 * rng.standard_normal(m),
            "W_dec": rng.standard_normal((n, m)) / np.sqrt(m),
            "b_dec": 0.2 * rng.standard_normal(n),
        }
        if variant.is_gated:
            perturbed["b_mag"] = 0.2 * rng.standard_normal(m)
            if untied_magnitude:
                perturbed["W_mag"] = params.W_mag + 0.3 * rng.standard_normal((m, n))
            else:
                perturbed["r_mag"] = 0.3 * rng.standard_normal(m)
        params = params.with_tensors(**perturbed)
        X = rng.standard_normal((batch, n))
        enc = get_model(variant).encode(params, X)
        kinks = [np.abs(enc.pi_gate)]
        if enc.pi_mag is not None:
            kinks.append(np.abs(enc.pi_mag))
        if min(float(k.min()) for k in kinks) >= margin:
            return params, X


@dataclass
class GradCheckReport:
    variant: SaeVariant
    worst_errors: dict[str, float]
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(error <= self.tolerance for error in self.worst_errors.values())

    def to_dict(self) -> dict:
        return {"variant": self.variant.value, "tolerance": self.tolerance, "passed": self.passed,
                "worst_relative_error": self.worst_errors}


def grad_check(variant: SaeVariant, n: int, m: int, batch: int, seed: int, step: float = Config.GRAD_CHECK_STEP,
               tolerance: float = Config.GRAD_CHECK_TOLERANCE, instances: int = 1, lam: float = 0.1,
               untied_magnitude: bool = False) -> GradCheckReport:
    rng = np.random.default_rng(seed)
    worst: dict[str, float] = {}
    for instance in range(instances):
        params, X = random_instance(variant, n, m, batch, rng, untied_magnitude=untied_magnitude)
        _, analytic = backward(params, X, lam)
        numeric = finite_diff_grad(params, X, lam, step)
        for name, error in relative_errors(analytic, numeric).items():
            worst[name] = max(worst.get(name, 0.0), error)
        logger.debug(f"Instance {instance}: {worst}")
    report = GradCheckReport(variant, worst, tolerance)
    logger.info(f"Gradient check [{variant.value}] passed={report.passed} worst={max(worst.values()):.3e}")
    return report
