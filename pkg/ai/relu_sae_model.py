import numpy as np

from ai.sae_model import LOSS_TERMS, SaeModel
from ai.sae_params import Array, EncodeResult, SaeParams
from ai.sae_variant import SaeVariant


class ReluSaeModel(SaeModel):
    """Single ReLU encoder: h = ReLU(W_enc x' + b_enc), sparsity on h."""

    def encode(self, params: SaeParams, X: Array) -> EncodeResult:
        self.check_input(params, X)
        pre = self.center(params, X) @ params.W_gate.T + params.b_gate
        h = np.maximum(pre, 0.0)
        return EncodeResult(h=h, pi_gate=pre, ra=h, h_mag=h)

    def loss_sums(self, params, X, frozen_decoder=None):
        enc = self.encode(params, X)
        error = self.decode(params, enc.h) - X
        reconstruct = np.sum(error * error)
        sparsity = np.sum(enc.h @ self.sparsity_weights(params))
        return self._finite_sum(reconstruct, "reconstruct"), self._finite_sum(sparsity, "sparsity"), 0.0

    def backward_sums(self, params, X, lam, terms=LOSS_TERMS):
        Xc = self.center(params, X)
        enc = self.encode(params, X)
        error = self.decode(params, enc.h) - X
        weights = self.sparsity_weights(params)

        reconstruct = self._finite_sum(np.sum(error * error), "reconstruct")
        sparsity = self._finite_sum(np.sum(enc.h @ weights), "sparsity")

        dW_dec = np.zeros_like(params.W_dec)
        db_dec = np.zeros_like(params.b_dec)
        dh = np.zeros_like(enc.h)

        if "reconstruct" in terms:
            g_out = 2.0 * error
            dW_dec += g_out.T @ enc.h
            db_dec += g_out.sum(axis=0)
            dh += g_out @ params.W_dec

        if "sparsity" in terms:
            dh += lam * weights
            if self.variant.norm_weighted:
                dW_dec += lam * self._decoder_norm_grad(params, enc.h.sum(axis=0))

        # ReLU derivative taken as 0 at the kink
        d_pre = dh * (enc.pi_gate > 0)
        grads = {
            "W_gate": d_pre.T @ Xc,
            "b_gate": d_pre.sum(axis=0),
            "W_dec": dW_dec,
            "b_dec": db_dec,
        }
        if self.variant.centers_input:
            grads["b_dec"] = db_dec - (d_pre @ params.W_gate).sum(axis=0)
        return (reconstruct, sparsity, 0.0), grads


class BaselineSae(ReluSaeModel):
    """Centered input, plain L1 on h; decoder columns kept at unit norm by the optimizer."""

    def __init__(self):
        super().__init__(SaeVariant.BASELINE)


class UnconstrainedNormSae(ReluSaeModel):
    """Uncentered input, L1 on h weighted by decoder column norms."""

    def __init__(self):
        super().__init__(SaeVariant.UNCONSTRAINED_NORM)
