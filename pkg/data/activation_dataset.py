from dataclasses import dataclass, field

import numpy as np

from ai.sae_params import Array
from errors import DegenerateDataError, DimensionError


@dataclass(frozen=True)
class ActivationDataset:
    """Rows of input vectors plus the constant they were scaled by.

    `scale` maps raw vectors to the stored ones (stored = raw * scale); ids
    index an external manifest.
    """
    data: Array
    scale: float = 1.0
    ids: np.ndarray = field(default=None)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise DimensionError(f"Dataset must be a matrix, got {data.ndim} dimensions")
        object.__setattr__(self, "data", data)
        ids = np.arange(data.shape[0], dtype=np.uint64) if self.ids is None else np.asarray(self.ids, dtype=np.uint64)
        if ids.shape != (data.shape[0],):
            raise DimensionError(f"Expected {data.shape[0]} ids, got {ids.shape}")
        if len(np.unique(ids)) != len(ids):
            raise DegenerateDataError("Example ids must be unique")
        object.__setattr__(self, "ids", ids)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def n(self) -> int:
        return self.data.shape[1]

    def raw(self) -> Array:
        return self.data / self.scale

    def normalized(self) -> "ActivationDataset":
        """Rescale so the mean row norm is sqrt(n); scales compose."""
        result = normalize(self.data, self.ids)
        return ActivationDataset(result.data, scale=self.scale * result.scale, ids=self.ids)

    def rescaled_like(self, reference: "ActivationDataset") -> "ActivationDataset":
        """Map these rows into the scaling of `reference`."""
        return ActivationDataset(self.raw() * reference.scale, scale=reference.scale, ids=self.ids)

    def take(self, indices) -> "ActivationDataset":
        return ActivationDataset(self.data[indices], scale=self.scale, ids=self.ids[indices])

    def index_of(self, example_id: int) -> int:
        matches = np.flatnonzero(self.ids == np.uint64(example_id))
        if len(matches) == 0:
            raise KeyError(f"No example with id {example_id}")
        return int(matches[0])


def normalize(data: Array, ids=None) -> ActivationDataset:
    """Scale every row by sqrt(n) / mean row norm, so E||x||_2 = sqrt(n)."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] < 1:
        raise DimensionError("normalize needs at least one row")
    mean_norm = float(np.mean(np.linalg.norm(data, axis=1)))
    if mean_norm == 0:
        raise DegenerateDataError("Cannot normalize an all-zero dataset")
    scale = np.sqrt(data.shape[1]) / mean_norm
    return ActivationDataset(data * scale, scale=scale, ids=ids)
