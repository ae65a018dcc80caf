import itertools
import logging
from dataclasses import dataclass

from pydantic import BaseModel, ConfigDict, Field

from config.train_config import TrainConfig
from data.activation_dataset import ActivationDataset
from data.synthetic import GroundTruthDictionary
from metrics.evaluation import evaluate
from training.trainer import train

logger = logging.getLogger(__name__)


class SweepGrid(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    lambdas: list[float] = Field(min_length=1)
    expansion_factors: list[int] = Field(min_length=1)
    seeds: list[int] = Field(min_length=1)


@dataclass
class SweepRow:
    expansion_factor: int
    lambda_max: float
    seed: int
    l0: float
    explained_variance: float | None
    dead_feature_count: int
    mmcs: float | None = None
    shrinkage_gap: float | None = None

    def to_dict(self) -> dict:
        return {
            "expansion_factor": self.expansion_factor,
            "lambda_max": self.lambda_max,
            "seed": self.seed,
            "l0": self.l0,
            "explained_variance": self.explained_variance,
            "dead_feature_count": self.dead_feature_count,
            "mmcs": self.mmcs,
            "shrinkage_gap": self.shrinkage_gap,
        }


def sweep(base: TrainConfig, grid: SweepGrid, data: ActivationDataset,
          truth: GroundTruthDictionary | None = None) -> list[SweepRow]:
    """Train and evaluate one SAE per (expansion, lambda, seed); rows come back in grid order."""
    rows = []
    combinations = list(itertools.product(grid.expansion_factors, grid.lambdas, grid.seeds))
    for index, (expansion, lam, seed) in enumerate(combinations, start=1):
        config = base.model_copy(update={"expansion_factor": expansion, "lambda_max": lam, "seed": seed})
        logger.info(f"Sweep run {index}/{len(combinations)}: expansion={expansion} lambda={lam} seed={seed}")
        params, _ = train(config, data, sample_memory=False)
        report = evaluate(params, data, truth)
        rows.append(SweepRow(expansion, lam, seed, report.l0, report.explained_variance, report.dead_feature_count,
                             report.mmcs, report.shrinkage_gap))
    return rows
