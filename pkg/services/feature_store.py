import json
import logging
from pathlib import Path

from data.atomic_file import write_jsonl_atomic
from errors import FormatError, StaleStoreError
from services.feature_description_service import FeatureRecord


class FeatureStore:
    """Feature descriptions on disk as JSONL, tied to the checkpoint they were made for.

    Feature indices are not stable across training runs, so every row carries
    the SHA-256 of its checkpoint and a store never serves another checkpoint.
    """

    def __init__(self, path: str | Path):
        self.logger = logging.getLogger(__name__)
        self.path = Path(path)

    def save(self, records: list[FeatureRecord], checkpoint_digest: str):
        rows = [{
            "feature": record.index,
            "description": record.description,
            "raw": record.raw_describer_output,
            "top_ids": record.top_ids,
            "top_activations": [activation for _, activation in record.top_examples],
            "checkpoint": checkpoint_digest,
        } for record in sorted(records, key=lambda record: record.index)]
        write_jsonl_atomic(self.path, rows)
        self.logger.info(f"Stored {len(rows)} feature descriptions in {self.path}")

    def load(self, checkpoint_digest: str | None = None) -> dict[int, FeatureRecord]:
        records = {}
        with open(self.path, "r", encoding="utf-8") as file:
            for line_number, line in enumerate(file, start=1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                    index = int(row["feature"])
                    activations = row.get("top_activations") or [0.0] * len(row["top_ids"])
                    record = FeatureRecord(index=index,
                                           top_examples=[(int(i), float(a)) for i, a in zip(row["top_ids"], activations)],
                                           description=row["description"], raw_describer_output=row.get("raw"))
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                    raise FormatError(f"Bad feature store line {line_number} in {self.path}: {e}") from e
                if checkpoint_digest is not None and row.get("checkpoint") != checkpoint_digest:
                    raise StaleStoreError(f"{self.path} was built for checkpoint {row.get('checkpoint')}, "
                                          f"not {checkpoint_digest}; regenerate the descriptions")
                records[index] = record
        return records

    def descriptions(self, checkpoint_digest: str | None = None) -> dict[int, str]:
        return {index: record.description for index, record in self.load(checkpoint_digest).items()
                if record.description is not None}
