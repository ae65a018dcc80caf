"""Unit-norm decoder columns for the Baseline architecture.

Before the optimizer step, each dW_dec column loses its component along the
matching W_dec column; after the step, each W_dec column is rescaled to unit
norm. Other variants pass through unchanged.
"""
from typing import Callable, TypeVar

import numpy as np

from ai.grad_engine import GradSet
from ai.sae_params import SaeParams
from ai.sae_variant import SaeVariant
from errors import DegenerateFeatureError

T = TypeVar("T")


def _column_norms(params: SaeParams) -> np.ndarray:
    norms = params.decoder_norms()
    dead = np.flatnonzero(norms == 0)
    if len(dead):
        raise DegenerateFeatureError(f"Decoder column {int(dead[0])} has zero norm", feature=int(dead[0]))
    return norms


def project_decoder_grads(params: SaeParams, grads: GradSet) -> GradSet:
    if params.variant != SaeVariant.BASELINE:
        return grads
    norms = _column_norms(params)
    W, G = params.W_dec, grads["W_dec"]
    # g - (g.w) w / ||w||^2 per column
    coefficients = np.sum(G * W, axis=0) / (norms * norms)
    return grads.with_tensor("W_dec", G - W * coefficients)


def renormalize_decoder(params: SaeParams) -> SaeParams:
    if params.variant != SaeVariant.BASELINE:
        return params
    return params.with_tensors(W_dec=params.W_dec / _column_norms(params))


def constrain_decoder(params: SaeParams, grads: GradSet,
                      update: Callable[[SaeParams, GradSet], tuple[SaeParams, T]]) -> tuple[SaeParams, T]:
    """Runs `update` on the projected gradients and renormalizes the parameters it returns."""
    updated, extra = update(params, project_decoder_grads(params, grads))
    return renormalize_decoder(updated), extra


def max_norm_deviation(params: SaeParams) -> float:
    return float(np.max(np.abs(params.decoder_norms() - 1.0)))
