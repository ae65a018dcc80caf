import numpy as np

from ai.sae_model import LOSS_TERMS, SaeModel
from ai.sae_params import Array, EncodeResult, SaeParams
from ai.sae_variant import SaeVariant


class GatedSaeModel(SaeModel):
    """Gated encoder shared by the Gated and SaeRad architectures.

    h = I[pi_gate > 0] * ReLU(W_mag x' + b_mag) with pi_gate = W_gate x' + b_gate.
    The Heaviside gate passes no gradient; the gate weights learn through
    RA = ReLU(pi_gate) in the sparsity and aux terms, and through the tied
    magnitude weights.
    """

    # Whether aux-loss gradients reach W_dec and b_dec through the decoder
    aux_trains_decoder = False

    def encode(self, params: SaeParams, X: Array) -> EncodeResult:
        self.check_input(params, X)
        Xc = self.center(params, X)
        pi_gate = Xc @ params.W_gate.T + params.b_gate
        pi_mag = Xc @ params.magnitude_weights().T + params.b_mag
        h_mag = np.maximum(pi_mag, 0.0)
        h = np.where(pi_gate > 0, h_mag, 0.0)
        return EncodeResult(h=h, pi_gate=pi_gate, ra=np.maximum(pi_gate, 0.0), h_mag=h_mag, pi_mag=pi_mag)

    def loss_sums(self, params, X, frozen_decoder=None):
        enc = self.encode(params, X)
        error = self.decode(params, enc.h) - X
        aux_decoder = frozen_decoder if frozen_decoder is not None and not self.aux_trains_decoder else params
        aux_error = self.decode(aux_decoder, enc.ra) - X
        return (
            self._finite_sum(np.sum(error * error), "reconstruct"),
            self._finite_sum(np.sum(enc.ra @ self.sparsity_weights(params)), "sparsity"),
            self._finite_sum(np.sum(aux_error * aux_error), "aux"),
        )

    def backward_sums(self, params, X, lam, terms=LOSS_TERMS):
        Xc = self.center(params, X)
        enc = self.encode(params, X)
        W_mag = params.magnitude_weights()
        weights = self.sparsity_weights(params)
        error = self.decode(params, enc.h) - X
        aux_error = self.decode(params, enc.ra) - X

        sums = (
            self._finite_sum(np.sum(error * error), "reconstruct"),
            self._finite_sum(np.sum(enc.ra @ weights), "sparsity"),
            self._finite_sum(np.sum(aux_error * aux_error), "aux"),
        )

        dW_dec = np.zeros_like(params.W_dec)
        db_dec = np.zeros_like(params.b_dec)
        dh = np.zeros_like(enc.h)
        d_ra = np.zeros_like(enc.ra)

        if "reconstruct" in terms:
            g_out = 2.0 * error
            dW_dec += g_out.T @ enc.h
            db_dec += g_out.sum(axis=0)
            dh += g_out @ params.W_dec

        if "aux" in terms:
            g_aux = 2.0 * aux_error
            d_ra += g_aux @ params.W_dec
            if self.aux_trains_decoder:
                dW_dec += g_aux.T @ enc.ra
                db_dec += g_aux.sum(axis=0)

        if "sparsity" in terms:
            d_ra += lam * weights
            if self.variant.norm_weighted:
                dW_dec += lam * self._decoder_norm_grad(params, enc.ra.sum(axis=0))

        d_pi_mag = dh * ((enc.pi_gate > 0) & (enc.pi_mag > 0))
        d_pi_gate = d_ra * (enc.pi_gate > 0)
        dW_mag = d_pi_mag.T @ Xc

        grads = {
            "W_gate": d_pi_gate.T @ Xc,
            "b_gate": d_pi_gate.sum(axis=0),
            "b_mag": d_pi_mag.sum(axis=0),
            "W_dec": dW_dec,
            "b_dec": db_dec,
        }
        if params.untied:
            grads["W_mag"] = dW_mag
        else:
            # W_mag[i, j] = exp(r_mag[i]) * W_gate[i, j]
            grads["W_gate"] += np.exp(params.r_mag)[:, None] * dW_mag
            grads["r_mag"] = np.sum(dW_mag * W_mag, axis=1)

        if self.variant.centers_input:
            d_centered = d_pi_mag @ W_mag + d_pi_gate @ params.W_gate
            grads["b_dec"] = db_dec - d_centered.sum(axis=0)
        return sums, grads


class GatedSae(GatedSaeModel):
    """Centered input, L1 on RA, aux term decoded through a frozen decoder."""

    def __init__(self):
        super().__init__(SaeVariant.GATED)


class SaeRadSae(GatedSaeModel):
    """Gated encoder with uncentered input, norm-weighted sparsity on RA, and a
    live-decoder aux term."""

    aux_trains_decoder = True

    def __init__(self):
        super().__init__(SaeVariant.SAE_RAD)
