"""Public forward operations, dispatched on the parameter set's variant."""
import numpy as np

from ai.gated_sae_model import GatedSae, SaeRadSae
from ai.relu_sae_model import BaselineSae, UnconstrainedNormSae
from ai.sae_model import SaeModel
from ai.sae_params import Array, EncodeResult, LossBreakdown, SaeParams
from ai.sae_variant import SaeVariant
from errors import DegenerateFeatureError, DimensionError, OutOfRangeError

MODELS: dict[SaeVariant, SaeModel] = {
    SaeVariant.BASELINE: BaselineSae(),
    SaeVariant.GATED: GatedSae(),
    SaeVariant.UNCONSTRAINED_NORM: UnconstrainedNormSae(),
    SaeVariant.SAE_RAD: SaeRadSae(),
}


def get_model(variant: SaeVariant) -> SaeModel:
    return MODELS[variant]


def as_batch(x: Array) -> tuple[Array, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return x[None, :], True
    if x.ndim != 2:
        raise DimensionError(f"Expected a vector or a matrix, got {x.ndim} dimensions")
    return x, False


def encode(params: SaeParams, x: Array) -> EncodeResult:
    X, single = as_batch(x)
    result = get_model(params.variant).encode(params, X)
    if single:
        return EncodeResult(h=result.h[0], pi_gate=result.pi_gate[0], ra=result.ra[0], h_mag=result.h_mag[0],
                            pi_mag=None if result.pi_mag is None else result.pi_mag[0])
    return result


def decode(params: SaeParams, h: Array) -> Array:
    H, single = as_batch(h)
    x_hat = get_model(params.variant).decode(params, H)
    return x_hat[0] if single else x_hat


def check_feature_index(params: SaeParams, i: int):
    if not 0 <= i < params.m:
        raise OutOfRangeError(f"Feature index {i} outside [0, {params.m})")


def feature_activations(params: SaeParams, h: Array) -> Array:
    """Norm-weighted activations h_i * ||W_dec[:, i]|| for the unconstrained-norm
    variants, plain h_i otherwise. Works on a vector or on rows of a matrix."""
    if np.shape(h)[-1] != params.m:
        raise DimensionError(f"Latent has dimension {np.shape(h)[-1]}, expected {params.m}")
    if params.variant.norm_weighted:
        return h * params.decoder_norms()
    return np.asarray(h, dtype=np.float64)


def feature_activation(params: SaeParams, h: Array, i: int) -> float:
    check_feature_index(params, i)
    if len(h) != params.m:
        raise DimensionError(f"Latent has dimension {len(h)}, expected {params.m}")
    if params.variant.norm_weighted:
        return float(h[i] * np.linalg.norm(params.W_dec[:, i]))
    return float(h[i])


def concept_direction(params: SaeParams, i: int) -> Array:
    check_feature_index(params, i)
    column = params.W_dec[:, i]
    norm = np.linalg.norm(column)
    if norm == 0:
        raise DegenerateFeatureError(f"Decoder column {i} has zero norm", feature=i)
    return column / norm


def loss(params: SaeParams, x: Array, lam: float, frozen_decoder: SaeParams | None = None) -> LossBreakdown:
    """Batch-mean loss breakdown; a single vector is a batch of one."""
    if lam < 0:
        raise ValueError(f"lambda must be non-negative, got {lam}")
    X, _ = as_batch(x)
    reconstruct, sparsity, aux = get_model(params.variant).loss_sums(params, X, frozen_decoder=frozen_decoder)
    batch = X.shape[0]
    return LossBreakdown(reconstruct=reconstruct / batch, sparsity=sparsity / batch, aux=aux / batch, lambda_=lam)
