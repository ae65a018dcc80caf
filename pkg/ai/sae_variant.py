from enum import Enum


class SaeVariant(str, Enum):
    BASELINE = "baseline"
    GATED = "gated"
    UNCONSTRAINED_NORM = "unconstrained_norm"
    SAE_RAD = "sae_rad"

    @property
    def tag(self) -> int:
        return _TAGS[self]

    @staticmethod
    def from_tag(tag: int) -> "SaeVariant":
        for variant, value in _TAGS.items():
            if value == tag:
                return variant
        raise ValueError(f"Unknown variant tag: {tag}")

    @property
    def is_gated(self) -> bool:
        return self in (SaeVariant.GATED, SaeVariant.SAE_RAD)

    @property
    def centers_input(self) -> bool:
        """Baseline and Gated subtract b_dec before the encoder's affine map."""
        return self in (SaeVariant.BASELINE, SaeVariant.GATED)

    @property
    def norm_weighted(self) -> bool:
        """Sparsity and feature activation are scaled by decoder column norms."""
        return self in (SaeVariant.UNCONSTRAINED_NORM, SaeVariant.SAE_RAD)


_TAGS = {
    SaeVariant.BASELINE: 0,
    SaeVariant.GATED: 1,
    SaeVariant.UNCONSTRAINED_NORM: 2,
    SaeVariant.SAE_RAD: 3,
}
