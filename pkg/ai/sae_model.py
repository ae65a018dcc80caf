import logging
from abc import ABC, abstractmethod

import numpy as np

from ai.sae_params import Array, EncodeResult, SaeParams
from ai.sae_variant import SaeVariant
from errors import DimensionError, NumericsError

LOSS_TERMS = ("reconstruct", "sparsity", "aux")


class SaeModel(ABC):
    """Forward and analytic backward computations of one SAE architecture.

    Every method works on a batch (rows of X) and is a pure function of its
    arguments, so one instance is shared by all callers. Loss and gradient
    values are returned as sums over the batch; callers apply the mean.
    """

    def __init__(self, variant: SaeVariant):
        self.logger = logging.getLogger(__name__)
        self.variant = variant

    def center(self, params: SaeParams, X: Array) -> Array:
        if self.variant.centers_input:
            return X - params.b_dec
        return X

    def decode(self, params: SaeParams, H: Array) -> Array:
        if H.shape[-1] != params.m:
            raise DimensionError(f"Latent has dimension {H.shape[-1]}, expected {params.m}")
        return H @ params.W_dec.T + params.b_dec

    def sparsity_weights(self, params: SaeParams) -> Array:
        if self.variant.norm_weighted:
            return params.decoder_norms()
        return np.ones(params.m)

    def check_input(self, params: SaeParams, X: Array):
        if X.ndim != 2 or X.shape[1] != params.n:
            raise DimensionError(f"Input has shape {X.shape}, expected (*, {params.n})")
        if not np.all(np.isfinite(X)):
            raise NumericsError("Input contains non-finite values", parameter="x")

    @abstractmethod
    def encode(self, params: SaeParams, X: Array) -> EncodeResult:
        pass

    @abstractmethod
    def loss_sums(self, params: SaeParams, X: Array,
                  frozen_decoder: SaeParams | None = None) -> tuple[float, float, float]:
        """Batch sums of (reconstruct, unweighted sparsity, aux).

        `frozen_decoder` supplies the decoder used by a stop-gradient aux term;
        it only changes values when it differs from `params`.
        """

    @abstractmethod
    def backward_sums(self, params: SaeParams, X: Array, lam: float,
                      terms: tuple[str, ...] = LOSS_TERMS) -> tuple[tuple[float, float, float], dict[str, Array]]:
        """Batch sums of the loss terms and of d(total)/d(param) for every tensor."""

    @staticmethod
    def _decoder_norm_grad(params: SaeParams, column_weights: Array) -> Array:
        """d/dW_dec of sum_i column_weights[i] * ||W_dec[:, i]||."""
        norms = params.decoder_norms()
        safe = np.where(norms > 0, norms, 1.0)
        return params.W_dec * np.where(norms > 0, column_weights / safe, 0.0)

    @staticmethod
    def _finite_sum(value: float, name: str) -> float:
        if not np.isfinite(value):
            raise NumericsError(f"Loss term {name} is not finite", parameter=name)
        return float(value)
