"""Synthetic superposition corpora with a known ground-truth dictionary.

Each row is a sparse nonnegative combination of M_true unit directions in
n dimensions (M_true may exceed n), plus optional gaussian noise.
"""
import io
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import sparse

from ai.sae_params import Array
from data.activation_dataset import ActivationDataset
from data.atomic_file import write_bytes_atomic
from errors import FormatError

logger = logging.getLogger(__name__)

GENERATION_CHUNK_ROWS = 4096


class SyntheticSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    n: int = Field(ge=1)
    M_true: int = Field(ge=1)
    rows: int = Field(ge=1)
    p_active: float = Field(gt=0.0, lt=1.0)
    magnitude_range: tuple[float, float] = (0.0, 1.0)
    noise_sigma: float = Field(default=0.0, ge=0.0)
    seed: int = 0

    @model_validator(mode="after")
    def check_range(self):
        lo, hi = self.magnitude_range
        if not 0.0 <= lo <= hi:
            raise ValueError(f"magnitude_range must satisfy 0 <= lo <= hi, got {self.magnitude_range}")
        return self


@dataclass(frozen=True)
class GroundTruthDictionary:
    D: Array
    coefficients: sparse.csr_array

    @property
    def n(self) -> int:
        return self.D.shape[0]

    @property
    def M_true(self) -> int:
        return self.D.shape[1]

    def active_counts(self) -> np.ndarray:
        return np.diff(self.coefficients.indptr)

    def mean_active_coefficient(self) -> float:
        values = self.coefficients.data
        values = values[values > 0]
        return float(values.mean()) if len(values) else 0.0


def generate_synthetic(spec: SyntheticSpec) -> tuple[ActivationDataset, GroundTruthDictionary]:
    rng = np.random.default_rng(spec.seed)
    D = rng.standard_normal((spec.n, spec.M_true))
    D /= np.linalg.norm(D, axis=0, keepdims=True)

    lo, hi = spec.magnitude_range
    rows, blocks = [], []
    for start in range(0, spec.rows, GENERATION_CHUNK_ROWS):
        size = min(GENERATION_CHUNK_ROWS, spec.rows - start)
        active = rng.random((size, spec.M_true)) < spec.p_active
        magnitudes = rng.uniform(lo, hi, (size, spec.M_true))
        coefficients = np.where(active, magnitudes, 0.0)
        X = coefficients @ D.T
        if spec.noise_sigma > 0:
            X += spec.noise_sigma * rng.standard_normal((size, spec.n))
        rows.append(X)
        blocks.append(sparse.csr_array(coefficients))

    truth = GroundTruthDictionary(D=D, coefficients=sparse.vstack(blocks, format="csr"))
    dataset = ActivationDataset(np.vstack(rows))
    logger.info(f"Generated {spec.rows} rows, n={spec.n}, M_true={spec.M_true}, "
                f"mean active={truth.active_counts().mean():.2f}")
    return dataset, truth


def planted_reports(truth: GroundTruthDictionary, ids: np.ndarray) -> list[dict]:
    """One manifest row per example naming its active ground-truth features, strongest first."""
    manifest = []
    coefficients = truth.coefficients
    for row, example_id in enumerate(ids):
        start, end = coefficients.indptr[row], coefficients.indptr[row + 1]
        columns = coefficients.indices[start:end]
        values = coefficients.data[start:end]
        order = np.lexsort((columns, -values))
        findings = [f"Finding {int(columns[k])} present." for k in order if values[k] > 0]
        manifest.append({"id": int(example_id), "report": " ".join(findings) if findings else "No findings."})
    return manifest


def save_truth(truth: GroundTruthDictionary, path: str | Path):
    coefficients = truth.coefficients
    buffer = io.BytesIO()
    np.savez(buffer, D=truth.D, data=coefficients.data, indices=coefficients.indices,
             indptr=coefficients.indptr, shape=np.asarray(coefficients.shape))
    write_bytes_atomic(path, buffer.getvalue())
    logger.info(f"Saved ground-truth dictionary ({truth.n}x{truth.M_true}) to {path}")


def load_truth(path: str | Path) -> GroundTruthDictionary:
    try:
        with np.load(path) as archive:
            coefficients = sparse.csr_array((archive["data"], archive["indices"], archive["indptr"]),
                                            shape=tuple(archive["shape"]))
            return GroundTruthDictionary(D=archive["D"], coefficients=coefficients)
    except (KeyError, ValueError) as e:
        raise FormatError(f"Invalid ground-truth file {path}: {e}") from e
