import os

import numpy as np

from ai.sae_params import SaeParams
from ai.sae_variant import SaeVariant

GOLDEN_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "golden")


def identity_params(variant: SaeVariant, n: int = 2) -> SaeParams:
    """n = m, identity gate and decoder, zero biases, r_mag = 0."""
    eye = np.eye(n)
    extra = {"r_mag": np.zeros(n), "b_mag": np.zeros(n)} if variant.is_gated else {}
    return SaeParams(variant=variant, W_gate=eye.copy(), b_gate=np.zeros(n), W_dec=eye.copy(), b_dec=np.zeros(n),
                     **extra)


def golden(name: str) -> str:
    with open(os.path.join(GOLDEN_DIR, name), "r", encoding="utf-8", newline="") as file:
        return file.read()
