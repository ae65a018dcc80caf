import json
import logging
import os
from pathlib import Path

from memory_profiler import memory_usage

from ai.sae_params import LossBreakdown


class TrainingTelemetry:
    """Streams one JSON line per logged training step and keeps the records in memory."""

    def __init__(self, path: str | Path | None = None, sample_memory: bool = True):
        self.logger = logging.getLogger(__name__)
        self.records: list[dict] = []
        self.__path = path
        self.__file = None
        self.__sample_memory = sample_memory

    def start(self):
        if self.__path is not None:
            os.makedirs(os.path.dirname(os.path.abspath(self.__path)), exist_ok=True)
            self.__file = open(self.__path, "w", encoding="utf-8")

    def shutdown(self):
        if self.__file:
            self.__file.close()
            self.__file = None

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, exc_type, exc, tb):
        self.shutdown()

    def record(self, step: int, breakdown: LossBreakdown, lr: float, lam: float, l0_batch: float,
               decoder_norm_deviation: float | None = None) -> dict:
        record = {
            "step": step,
            "loss": breakdown.to_dict(),
            "lr": lr,
            "lambda": lam,
            "l0_batch": l0_batch,
        }
        if decoder_norm_deviation is not None:
            record["decoder_norm_deviation"] = decoder_norm_deviation
        if self.__sample_memory:
            record["memory_mb"] = self.__memory_mb()
        self.records.append(record)
        if self.__file:
            self.__file.write(json.dumps(record) + "\n")
            self.__file.flush()
        self.logger.debug(f"step {step}: loss={breakdown.total:.6f} l0={l0_batch:.2f} lr={lr:.3e} lambda={lam:.3e}")
        return record

    @staticmethod
    def __memory_mb() -> float:
        return float(memory_usage(-1, interval=0, timeout=None)[0])
