"""Activation-space interventions on a trained SAE.

do_op reassigns one latent entry. A counterfactual token is the decoding of
the edited latent, optionally shifted by the reconstruction error
delta = decode(encode(z)) - z. Beta is always in raw latent (h) units; the
conversion helpers map to and from norm-weighted feature activations.
"""
import logging
from dataclasses import dataclass

import numpy as np

from ai.sae_core import check_feature_index, decode, encode
from ai.sae_params import Array, SaeParams
from config.config import Config
from errors import DegenerateFeatureError, DimensionError, OutOfRangeError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class InterventionSpec:
    feature: int
    beta: float = Config.INTERVENTION_BETA
    apply_delta_correction: bool = True

    def __post_init__(self):
        if self.feature < 0:
            raise OutOfRangeError(f"Feature index must be non-negative, got {self.feature}")
        if not self.beta >= 0:
            raise ValueError(f"beta must be non-negative, got {self.beta}")


@dataclass(frozen=True)
class CounterfactualToken:
    z_tilde: Array
    base_z: Array
    delta: Array
    spec: InterventionSpec

    @property
    def emitted(self) -> Array:
        if self.spec.apply_delta_correction:
            return self.z_tilde + self.delta
        return self.z_tilde


@dataclass(frozen=True)
class CyclicResult:
    z_on: Array
    z_off: Array
    residual: float


def do_op(h: Array, i: int, beta: float) -> Array:
    h = np.array(h, dtype=np.float64)
    if h.ndim != 1:
        raise DimensionError(f"do_op takes a latent vector, got {h.ndim} dimensions")
    if not 0 <= i < h.shape[0]:
        raise OutOfRangeError(f"Feature index {i} outside [0, {h.shape[0]})")
    h[i] = beta
    return h


def _check_token(params: SaeParams, z: Array) -> Array:
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (params.n,):
        raise DimensionError(f"Token has shape {z.shape}, expected ({params.n},)")
    return z


def counterfactual_token(params: SaeParams, z: Array, spec: InterventionSpec) -> CounterfactualToken:
    z = _check_token(params, z)
    check_feature_index(params, spec.feature)
    h = encode(params, z).h
    z_tilde = decode(params, do_op(h, spec.feature, spec.beta))
    delta = decode(params, h) - z
    return CounterfactualToken(z_tilde=z_tilde, base_z=z, delta=delta, spec=spec)


def cyclic_consistency(params: SaeParams, z: Array, i: int, beta: float,
                       reencode_corrected: bool = False) -> CyclicResult:
    """Activate feature i at beta, re-encode, deactivate, and compare with deactivating directly.

    The residual is lossy by nature and only reported.
    """
    z = _check_token(params, z)
    token = counterfactual_token(params, z, InterventionSpec(i, beta, apply_delta_correction=reencode_corrected))
    z_on = token.emitted
    z_off = decode(params, do_op(encode(params, z_on).h, i, 0.0))
    direct_off = decode(params, do_op(encode(params, z).h, i, 0.0))
    return CyclicResult(z_on=z_on, z_off=z_off, residual=float(np.linalg.norm(z_off - direct_off)))


def displacement(params: SaeParams, z: Array, spec: InterventionSpec) -> tuple[float, float]:
    """Norm of z_tilde - x_hat and its largest deviation from (beta - h_i) * W_dec[:, i]."""
    z = _check_token(params, z)
    check_feature_index(params, spec.feature)
    h = encode(params, z).h
    shift = decode(params, do_op(h, spec.feature, spec.beta)) - decode(params, h)
    expected = (spec.beta - h[spec.feature]) * params.W_dec[:, spec.feature]
    return float(np.linalg.norm(shift)), float(np.max(np.abs(shift - expected)))


def beta_from_activation(params: SaeParams, i: int, activation: float) -> float:
    """Raw latent value giving a norm-weighted feature activation."""
    check_feature_index(params, i)
    if not params.variant.norm_weighted:
        return float(activation)
    norm = float(np.linalg.norm(params.W_dec[:, i]))
    if norm == 0:
        raise DegenerateFeatureError(f"Decoder column {i} has zero norm", feature=i)
    return float(activation) / norm


def activation_from_beta(params: SaeParams, i: int, beta: float) -> float:
    check_feature_index(params, i)
    if not params.variant.norm_weighted:
        return float(beta)
    return float(beta) * float(np.linalg.norm(params.W_dec[:, i]))
