"""Sparsity, fidelity and dictionary-recovery metrics.

All data-dependent metrics come from one chunked pass over the dataset, so
fire counts, L0 and reconstruction error always agree with each other.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ai.sae_core import decode, encode, feature_activations
from ai.sae_params import Array, SaeParams
from config.app_config import AppConfig
from config.config import Config
from data.activation_dataset import ActivationDataset
from data.synthetic import GroundTruthDictionary
from errors import DegenerateDataError, DegenerateFeatureError, DimensionError

logger = logging.getLogger(__name__)

EVAL_CHUNK_ROWS = 16 * Config.CHUNK_ROWS
EXPLAINED_VARIANCE_DEFINITION = "total-variance"


@dataclass
class DatasetPass:
    rows: int
    active_total: int
    squared_error: float
    total_variance: float
    fire_counts: np.ndarray
    active_magnitude_sum: float


def _chunk_stats(params: SaeParams, X: Array, mean_row: Array) -> tuple:
    h = encode(params, X).h
    active = h > 0
    residual = X - decode(params, h)
    centered = X - mean_row
    magnitudes = feature_activations(params, h)[active]
    return (int(np.count_nonzero(active)), float(np.sum(residual * residual)), float(np.sum(centered * centered)),
            np.count_nonzero(active, axis=0), float(np.sum(magnitudes)))


def dataset_pass(params: SaeParams, data: ActivationDataset) -> DatasetPass:
    if data.n != params.n:
        raise DimensionError(f"Dataset has dimension {data.n}, checkpoint expects {params.n}")
    X = data.data
    mean_row = X.mean(axis=0)
    chunks = [X[start:start + EVAL_CHUNK_ROWS] for start in range(0, data.rows, EVAL_CHUNK_ROWS)]
    if AppConfig.threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=AppConfig.threads) as executor:
            parts = list(executor.map(lambda chunk: _chunk_stats(params, chunk, mean_row), chunks))
    else:
        parts = [_chunk_stats(params, chunk, mean_row) for chunk in chunks]

    fire_counts = np.zeros(params.m, dtype=np.int64)
    active_total, squared_error, total_variance, magnitude_sum = 0, 0.0, 0.0, 0.0
    for active, error, variance, counts, magnitudes in parts:
        active_total += active
        squared_error += error
        total_variance += variance
        fire_counts += counts
        magnitude_sum += magnitudes
    return DatasetPass(data.rows, active_total, squared_error, total_variance, fire_counts, magnitude_sum)


@dataclass
class EvalReport:
    l0: float
    mse: float
    explained_variance: float | None
    dead_feature_count: int
    per_feature_fire_counts: list[int]
    mmcs: float | None = None
    mean_active_magnitude: float | None = None
    shrinkage_gap: float | None = None

    def to_dict(self) -> dict:
        report = {
            "l0": self.l0,
            "mse": self.mse,
            "explained_variance": self.explained_variance,
            "dead_feature_count": self.dead_feature_count,
            "per_feature_fire_counts": self.per_feature_fire_counts,
            "metadata": {"explained_variance_definition": EXPLAINED_VARIANCE_DEFINITION},
        }
        if self.mmcs is not None:
            report["mmcs"] = self.mmcs
            report["mean_active_magnitude"] = self.mean_active_magnitude
            report["shrinkage_gap"] = self.shrinkage_gap
        return report


def _explained_variance(stats: DatasetPass) -> float:
    if stats.rows < 2:
        raise DegenerateDataError("Explained variance needs at least two rows")
    if stats.total_variance == 0:
        raise DegenerateDataError("Dataset has zero variance")
    return 1.0 - stats.squared_error / stats.total_variance


def l0(params: SaeParams, data: ActivationDataset) -> float:
    """Mean count of strictly positive latent entries per example."""
    stats = dataset_pass(params, data)
    return stats.active_total / stats.rows


def explained_variance(params: SaeParams, data: ActivationDataset) -> float:
    """1 - sum ||x - x_hat||^2 / sum ||x - mean||^2 over the whole dataset."""
    return _explained_variance(dataset_pass(params, data))


def dead_features(params: SaeParams, data: ActivationDataset) -> np.ndarray:
    return np.flatnonzero(dataset_pass(params, data).fire_counts == 0)


def mean_active_magnitude(params: SaeParams, data: ActivationDataset) -> float:
    """Mean feature activation over firing entries, mapped back to raw data units."""
    stats = dataset_pass(params, data)
    if stats.active_total == 0:
        return 0.0
    return stats.active_magnitude_sum / stats.active_total / data.scale


def shrinkage_gap(params: SaeParams, data: ActivationDataset, truth: GroundTruthDictionary) -> float:
    """Relative shortfall of learned active magnitudes against the true coefficients."""
    true_mean = truth.mean_active_coefficient()
    if true_mean == 0:
        raise DegenerateDataError("Ground truth has no active coefficients")
    return 1.0 - mean_active_magnitude(params, data) / true_mean


def _unit_columns(matrix: Array) -> tuple[Array, np.ndarray]:
    norms = np.linalg.norm(matrix, axis=0)
    keep = np.flatnonzero(norms > 0)
    return matrix[:, keep] / norms[keep], keep


def mmcs(learned: SaeParams, truth: GroundTruthDictionary) -> float:
    """Mean over true directions of the best cosine similarity to any learned concept direction."""
    if learned.n != truth.n:
        raise DimensionError(f"Learned dictionary has dimension {learned.n}, ground truth {truth.n}")
    true_directions, kept_true = _unit_columns(truth.D)
    if len(kept_true) != truth.M_true:
        raise DegenerateDataError("Ground-truth dictionary has zero columns")
    learned_directions, kept = _unit_columns(learned.W_dec)
    skipped = learned.m - len(kept)
    if skipped:
        logger.warning(f"Skipping {skipped} zero decoder columns in MMCS")
    if len(kept) == 0:
        raise DegenerateFeatureError("Every decoder column has zero norm")

    best = np.empty(truth.M_true)
    for start in range(0, truth.M_true, EVAL_CHUNK_ROWS):
        block = true_directions[:, start:start + EVAL_CHUNK_ROWS]
        best[start:start + block.shape[1]] = np.max(block.T @ learned_directions, axis=1)
    return float(np.mean(best))


def evaluate(params: SaeParams, data: ActivationDataset, truth: GroundTruthDictionary | None = None) -> EvalReport:
    stats = dataset_pass(params, data)
    try:
        ev = _explained_variance(stats)
    except DegenerateDataError as e:
        logger.warning(f"Explained variance undefined: {e}")
        ev = None
    report = EvalReport(
        l0=stats.active_total / stats.rows,
        mse=stats.squared_error / stats.rows,
        explained_variance=ev,
        dead_feature_count=int(np.count_nonzero(stats.fire_counts == 0)),
        per_feature_fire_counts=[int(count) for count in stats.fire_counts],
    )
    if truth is not None:
        report.mmcs = mmcs(params, truth)
        magnitude = stats.active_magnitude_sum / stats.active_total / data.scale if stats.active_total else 0.0
        report.mean_active_magnitude = magnitude
        true_mean = truth.mean_active_coefficient()
        report.shrinkage_gap = 1.0 - magnitude / true_mean if true_mean else None
    logger.info(f"Evaluated {stats.rows} rows: l0={report.l0:.3f} mse={report.mse:.6f} ev={ev}")
    return report
