import asyncio
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from ai.sae_core import check_feature_index, concept_direction, encode, feature_activations
from ai.sae_params import Array, SaeParams
from config.config import Config
from data.activation_dataset import ActivationDataset
from data.manifest import Manifest
from errors import BackendError, DegenerateFeatureError, DescriberError, EmptyFeatureError, ParseError, PipelineError
from services.prompts import DESCRIBE_PREAMBLE, DESCRIBE_REPORT_LINE
from services.text_backend import TextBackend

logger = logging.getLogger(__name__)


@dataclass
class FeatureRecord:
    index: int
    top_examples: list[tuple[int, float]]
    description: str | None = None
    raw_describer_output: str | None = None
    direction: Array | None = field(default=None, repr=False)

    @property
    def top_ids(self) -> list[int]:
        return [example_id for example_id, _ in self.top_examples]

    def to_dict(self) -> dict:
        return {
            "feature": self.index,
            "top_examples": [{"id": example_id, "activation": activation}
                             for example_id, activation in self.top_examples],
            "description": self.description,
        }


def _direction_or_none(params: SaeParams, i: int) -> Array | None:
    try:
        return concept_direction(params, i)
    except DegenerateFeatureError:
        return None


def _ranked(activations: np.ndarray, ids: np.ndarray, k: int) -> list[tuple[int, float]]:
    firing = np.flatnonzero(activations > 0)
    # descending activation, ascending id on ties
    order = firing[np.lexsort((ids[firing], -activations[firing]))][:k]
    return [(int(ids[j]), float(activations[j])) for j in order]


def top_k(params: SaeParams, data: ActivationDataset, i: int, k: int = Config.TOP_K) -> FeatureRecord:
    """The k examples with the highest feature activation for feature i."""
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    check_feature_index(params, i)
    activations = np.empty(data.rows)
    for start in range(0, data.rows, Config.CHUNK_ROWS):
        h = encode(params, data.data[start:start + Config.CHUNK_ROWS]).h
        activations[start:start + h.shape[0]] = feature_activations(params, h)[:, i]
    top = _ranked(activations, data.ids, k)
    if not top:
        raise EmptyFeatureError(f"Feature {i} never fires on {data.rows} examples")
    return FeatureRecord(index=i, top_examples=top, direction=_direction_or_none(params, i))


def top_k_all(params: SaeParams, data: ActivationDataset, k: int = Config.TOP_K) -> dict[int, FeatureRecord]:
    """top_k for every feature in one pass; features that never fire are left out."""
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    m = params.m
    best_activations = np.empty((m, 0))
    best_ids = np.empty((m, 0), dtype=np.uint64)
    for start in range(0, data.rows, Config.CHUNK_ROWS):
        chunk = data.data[start:start + Config.CHUNK_ROWS]
        activations = np.concatenate([best_activations, feature_activations(params, encode(params, chunk).h).T], axis=1)
        chunk_ids = np.broadcast_to(data.ids[start:start + chunk.shape[0]], (m, chunk.shape[0]))
        ids = np.concatenate([best_ids, chunk_ids], axis=1)
        order = np.lexsort((ids, -activations), axis=-1)[:, :k]
        best_activations = np.take_along_axis(activations, order, axis=1)
        best_ids = np.take_along_axis(ids, order, axis=1)

    records = {}
    for i in range(m):
        firing = best_activations[i] > 0
        if np.any(firing):
            top = [(int(example_id), float(activation))
                   for example_id, activation in zip(best_ids[i][firing], best_activations[i][firing])]
            records[i] = FeatureRecord(index=i, top_examples=top, direction=_direction_or_none(params, i))
    logger.info(f"{len(records)} of {m} features fire at least once")
    return records


def build_describe_prompt(record: FeatureRecord, manifest: Manifest) -> str:
    if not record.top_examples:
        raise PipelineError(f"Feature {record.index} has no examples to describe")
    lines = [DESCRIBE_PREAMBLE]
    for number, example_id in enumerate(record.top_ids, start=1):
        lines.append(DESCRIBE_REPORT_LINE.format(number=number, report=manifest.report(example_id).strip()))
    return "\n".join(lines) + "\n"


def parse_description(raw: str) -> str:
    """Text after the last asterisk, trimmed."""
    position = raw.rfind("*")
    if position < 0:
        raise ParseError("Describer reply has no '*' separator")
    description = raw[position + 1:].strip()
    if not description:
        raise ParseError("Describer reply has nothing after the final '*'")
    return description


async def describe_feature(record: FeatureRecord, describer: TextBackend, manifest: Manifest,
                           retries: int = Config.DESCRIBE_RETRIES) -> FeatureRecord:
    if retries < 0:
        raise ValueError(f"retries must be non-negative, got {retries}")
    prompt = build_describe_prompt(record, manifest)
    last_error = None
    for attempt in range(retries + 1):
        try:
            raw = await describer.send(prompt)
            return replace(record, description=parse_description(raw), raw_describer_output=raw)
        except (ParseError, BackendError) as e:
            last_error = e
            logger.warning(f"Feature {record.index}: attempt {attempt + 1}/{retries + 1} failed: {e}")
    raise DescriberError(f"Feature {record.index} not described after {retries + 1} attempts: {last_error}")


async def describe_features(records: list[FeatureRecord], describer: TextBackend, manifest: Manifest,
                            retries: int = Config.DESCRIBE_RETRIES, max_in_flight: int = 4) -> list[FeatureRecord]:
    """Describe many features concurrently; the result is ordered by feature index."""
    semaphore = asyncio.Semaphore(max_in_flight)

    async def bounded(record: FeatureRecord) -> FeatureRecord:
        async with semaphore:
            return await describe_feature(record, describer, manifest, retries)

    described = await asyncio.gather(*(bounded(record) for record in records))
    return sorted(described, key=lambda record: record.index)
