import json
import logging
from dataclasses import dataclass
from pathlib import Path

from errors import FormatError, ManifestError


@dataclass(frozen=True)
class ManifestEntry:
    id: int
    report: str
    timing: str | None = None


class Manifest:
    """Example id -> report text, read from JSONL lines {"id": u64, "report": str}.

    An optional "timing" field holds a relative timing string used when the
    entry is quoted as a prior report.
    """

    def __init__(self, entries: list[ManifestEntry]):
        self.logger = logging.getLogger(__name__)
        self.__entries = {}
        for entry in entries:
            if entry.id in self.__entries:
                raise ManifestError(f"Duplicate manifest id {entry.id}")
            self.__entries[entry.id] = entry

    def __len__(self):
        return len(self.__entries)

    def __contains__(self, example_id) -> bool:
        return int(example_id) in self.__entries

    def entry(self, example_id) -> ManifestEntry:
        entry = self.__entries.get(int(example_id))
        if entry is None:
            raise ManifestError(f"No report for example id {example_id}")
        return entry

    def report(self, example_id) -> str:
        return self.entry(example_id).report

    def entries(self) -> list[ManifestEntry]:
        """Entries in file order."""
        return list(self.__entries.values())

    @staticmethod
    def from_rows(rows: list[dict]) -> "Manifest":
        return Manifest([ManifestEntry(int(row["id"]), row["report"], row.get("timing")) for row in rows])

    @staticmethod
    def load(path: str | Path) -> "Manifest":
        rows = []
        with open(path, "r", encoding="utf-8") as file:
            for line_number, line in enumerate(file, start=1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                    rows.append(ManifestEntry(int(row["id"]), str(row["report"]), row.get("timing")))
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                    raise FormatError(f"Bad manifest line {line_number} in {path}: {e}") from e
        manifest = Manifest(rows)
        manifest.logger.info(f"Loaded {len(manifest)} manifest entries from {path}")
        return manifest
