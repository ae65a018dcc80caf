import logging
from dataclasses import dataclass

import numpy as np

from ai.sae_core import as_batch, encode, feature_activations
from ai.sae_params import Array, SaeParams
from config.config import Config
from data.activation_dataset import ActivationDataset
from data.manifest import Manifest, ManifestEntry
from errors import BackendError, DegenerateDataError, DimensionError, GeneratorError, PipelineError
from services.prompts import (FEATURE_BLOCK, INDICATION_LEAD, NO_FEATURES_LINE, NO_FINDINGS_CLOSING, PRIOR_REPORT_HEADER,
                              PRIOR_REPORT_TIMING, REPORT_CLOSING, REPORT_INSTRUCTIONS, REPORT_PREAMBLE)
from services.text_backend import TextBackend

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ActiveFeature:
    feature: int
    activation: float
    importance: float


@dataclass(frozen=True)
class ActiveFeatureSet:
    example_id: int
    entries: list[ActiveFeature]

    def __len__(self):
        return len(self.entries)

    @property
    def features(self) -> list[int]:
        return [entry.feature for entry in self.entries]


def active_features(params: SaeParams, x: Array, tau: float = Config.ACTIVE_TAU, example_id: int = 0) -> ActiveFeatureSet:
    """Features whose activation exceeds tau, strongest first, importance relative to the strongest."""
    if tau < 0:
        raise ValueError(f"tau must be non-negative, got {tau}")
    X, single = as_batch(x)
    if not single:
        raise DimensionError("active_features takes a single vector")
    activations = feature_activations(params, encode(params, X[0]).h)
    active = np.flatnonzero(activations > tau)
    if len(active) == 0:
        return ActiveFeatureSet(example_id, [])
    order = active[np.lexsort((active, -activations[active]))]
    peak = activations[order[0]]
    entries = [ActiveFeature(int(i), float(activations[i]), float(activations[i] / peak)) for i in order]
    return ActiveFeatureSet(example_id, entries)


def _prior_lines(priors: list[ManifestEntry]) -> list[str]:
    lines = ["<patient_history>"]
    for number, prior in enumerate(priors, start=1):
        if prior.timing:
            header = PRIOR_REPORT_TIMING.format(number=number, timing=prior.timing)
        else:
            header = PRIOR_REPORT_HEADER.format(number=number)
        lines += ["<past_report>", header, prior.report.strip(), "</past_report>"]
    lines += ["</patient_history>", ""]
    return lines


def build_report_prompt(active_set: ActiveFeatureSet, descriptions: dict[int, str], indication: str | None = None,
                        prior_reports: list[ManifestEntry] | None = None) -> str:
    """Findings prompt. Prior reports are expected most recent first; only the first three are used."""
    missing = [feature for feature in active_set.features if not descriptions.get(feature)]
    if missing:
        raise PipelineError(f"No description for active features {missing}")

    lines = [REPORT_PREAMBLE]
    priors = list(prior_reports or [])[:Config.MAX_PRIOR_REPORTS]
    if priors:
        lines += _prior_lines(priors)
    lines.append("<current_chest_x_ray>")
    if active_set.entries:
        for number, entry in enumerate(active_set.entries, start=1):
            lines.append(FEATURE_BLOCK.format(number=number, score=entry.importance,
                                              description=descriptions[entry.feature].strip()))
    else:
        lines.append(NO_FEATURES_LINE)
    lines.append("</current_chest_x_ray>")
    if indication:
        lines += [f"{REPORT_INSTRUCTIONS} {INDICATION_LEAD}", "", "<indication>", indication.strip(), "</indication>"]
    else:
        lines.append(REPORT_INSTRUCTIONS)
    lines += ["", REPORT_CLOSING if active_set.entries else NO_FINDINGS_CLOSING]
    return "\n".join(lines) + "\n"


async def generate_report(x: Array, params: SaeParams, descriptions: dict[int, str], generator: TextBackend,
                          indication: str | None = None, priors: list[ManifestEntry] | None = None,
                          tau: float = Config.ACTIVE_TAU, example_id: int = 0) -> str:
    """The generator's findings paragraph, returned verbatim."""
    active_set = active_features(params, x, tau, example_id)
    prompt = build_report_prompt(active_set, descriptions, indication, priors)
    logger.debug(f"Example {example_id}: {len(active_set)} active features")
    try:
        return await generator.send(prompt)
    except BackendError as e:
        raise GeneratorError(f"Generator failed for example {example_id}: {e}") from e


def nn_baseline(x: Array, train_data: ActivationDataset, manifest: Manifest) -> str:
    """Report of the training example nearest to x in L2; ties go to the lowest id."""
    if train_data.rows == 0:
        raise DegenerateDataError("Nearest-neighbour baseline needs a non-empty training set")
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (train_data.n,):
        raise DimensionError(f"Query has shape {x.shape}, expected ({train_data.n},)")
    distances = np.empty(train_data.rows)
    for start in range(0, train_data.rows, Config.CHUNK_ROWS):
        difference = train_data.data[start:start + Config.CHUNK_ROWS] - x
        distances[start:start + difference.shape[0]] = np.sum(difference * difference, axis=1)
    nearest = np.flatnonzero(distances == distances.min())
    winner = int(train_data.ids[nearest].min())
    logger.debug(f"Nearest training example {winner} at distance {np.sqrt(distances.min()):.6f}")
    return manifest.report(winner)
