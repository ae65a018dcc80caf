from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np
import numpy.typing as npt

from ai.sae_variant import SaeVariant
from errors import DimensionError, NumericsError

Array = npt.NDArray[np.float64]

# Fixed tensor order; checkpoints, optimizer state and gradient sets all follow it
TENSOR_ORDER = ("W_gate", "b_gate", "r_mag", "W_mag", "b_mag", "W_dec", "b_dec")


@dataclass
class SaeParams:
    """All learnable tensors of one SAE.

    Baseline and UnconstrainedNorm use W_gate/b_gate as W_enc/b_enc. Gated and
    SaeRad tie the magnitude weights to the gate weights through r_mag
    (W_mag = exp(r_mag) * W_gate row-wise) unless W_mag is stored untied.
    """
    variant: SaeVariant
    W_gate: Array
    b_gate: Array
    W_dec: Array
    b_dec: Array
    r_mag: Array | None = None
    b_mag: Array | None = None
    W_mag: Array | None = None

    def __post_init__(self):
        self.validate()

    @property
    def n(self) -> int:
        return self.W_gate.shape[1]

    @property
    def m(self) -> int:
        return self.W_gate.shape[0]

    @property
    def W_enc(self) -> Array:
        return self.W_gate

    @property
    def b_enc(self) -> Array:
        return self.b_gate

    @property
    def untied(self) -> bool:
        return self.W_mag is not None

    def magnitude_weights(self) -> Array:
        """W_mag, derived on the fly from the gate weights when tied."""
        if self.W_mag is not None:
            return self.W_mag
        return np.exp(self.r_mag)[:, None] * self.W_gate

    def decoder_norms(self) -> Array:
        return np.linalg.norm(self.W_dec, axis=0)

    def validate(self):
        m, n = self.W_gate.shape
        expected = {"b_gate": (m,), "W_dec": (n, m), "b_dec": (n,)}
        if self.variant.is_gated:
            if self.b_mag is None or (self.r_mag is None) == (self.W_mag is None):
                raise DimensionError(f"{self.variant.value} needs b_mag and exactly one of r_mag / W_mag")
            expected["b_mag"] = (m,)
            if self.r_mag is not None:
                expected["r_mag"] = (m,)
            else:
                expected["W_mag"] = (m, n)
        elif self.r_mag is not None or self.b_mag is not None or self.W_mag is not None:
            raise DimensionError(f"{self.variant.value} has no magnitude path")
        for name, shape in expected.items():
            actual = getattr(self, name).shape
            if actual != shape:
                raise DimensionError(f"{name} has shape {actual}, expected {shape}")

    def tensors(self) -> Iterator[tuple[str, Array]]:
        for name in TENSOR_ORDER:
            value = getattr(self, name)
            if value is not None:
                yield name, value

    def names(self) -> list[str]:
        return [name for name, _ in self.tensors()]

    def copy(self) -> "SaeParams":
        return replace(self, **{name: value.copy() for name, value in self.tensors()})

    def with_tensors(self, **tensors: Array) -> "SaeParams":
        return replace(self, **tensors)

    def check_finite(self):
        for name, value in self.tensors():
            if not np.all(np.isfinite(value)):
                raise NumericsError(f"Parameter {name} contains non-finite values", parameter=name)


@dataclass
class EncodeResult:
    h: Array
    pi_gate: Array
    ra: Array
    h_mag: Array
    pi_mag: Array | None = None


@dataclass
class LossBreakdown:
    """Per-variant loss terms. `sparsity` is the unweighted penalty; `total` applies lambda."""
    reconstruct: float
    sparsity: float
    aux: float
    lambda_: float
    total: float = field(init=False)

    def __post_init__(self):
        self.total = self.reconstruct + self.lambda_ * self.sparsity + self.aux

    def to_dict(self) -> dict[str, float]:
        return {
            "reconstruct": self.reconstruct,
            "sparsity": self.sparsity,
            "aux": self.aux,
            "lambda": self.lambda_,
            "total": self.total,
        }


def init_params(variant: SaeVariant, n: int, m: int, rng: np.random.Generator,
                untied_magnitude: bool = False) -> SaeParams:
    """Zero biases, unit-norm gate rows in random directions, W_dec = W_gate^T."""
    W_gate = rng.standard_normal((m, n))
    W_gate /= np.linalg.norm(W_gate, axis=1, keepdims=True)
    params = dict(
        variant=variant,
        W_gate=W_gate,
        b_gate=np.zeros(m),
        W_dec=W_gate.T.copy(),
        b_dec=np.zeros(n),
    )
    if variant.is_gated:
        params["b_mag"] = np.zeros(m)
        if untied_magnitude:
            params["W_mag"] = W_gate.copy()
        else:
            params["r_mag"] = np.zeros(m)
    return SaeParams(**params)


def zero_params(variant: SaeVariant, n: int, m: int, untied_magnitude: bool = False) -> SaeParams:
    params = dict(variant=variant, W_gate=np.zeros((m, n)), b_gate=np.zeros(m),
                  W_dec=np.zeros((n, m)), b_dec=np.zeros(n))
    if variant.is_gated:
        params["b_mag"] = np.zeros(m)
        if untied_magnitude:
            params["W_mag"] = np.zeros((m, n))
        else:
            params["r_mag"] = np.zeros(m)
    return SaeParams(**params)
