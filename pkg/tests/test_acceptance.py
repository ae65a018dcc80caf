"""Desk-scale recovery and trend runs on a synthetic superposition corpus.

These train for tens of thousands of steps; run them with `pytest -m slow`.
"""
import numpy as np
import pytest

from ai.checkpoint import to_bytes
from ai.sae_variant import SaeVariant
from config.app_config import AppConfig
from config.config import Config
from config.train_config import TrainConfig
from data.synthetic import SyntheticSpec, generate_synthetic
from metrics.evaluation import evaluate
from training.decoder_constraint import max_norm_deviation
from training.trainer import train

pytestmark = pytest.mark.slow

CORPUS = SyntheticSpec(n=64, M_true=256, rows=50_000, p_active=0.02, noise_sigma=0.01, seed=11)
RECOVERY = TrainConfig(variant=SaeVariant.SAE_RAD, expansion_factor=8, steps=20_000, batch_size=256, lr_max=1e-3,
                       lambda_max=0.05, seed=0, log_every=1000, snapshot_every=5000)
TREND_STEPS = 5000
TREND_LAMBDAS = (0.025, 0.05, 0.1)
SEEDS = (0, 1, 2)

_runs = {}


@pytest.fixture(scope="module")
def corpus():
    dataset, truth = generate_synthetic(CORPUS)
    return dataset.normalized(), truth


def run(config: TrainConfig, corpus):
    if config not in _runs:
        data, truth = corpus
        params, report = train(config, data, sample_memory=False)
        _runs[config] = params, report, evaluate(params, data, truth)
    return _runs[config]


def trend_config(variant: SaeVariant, lam: float, seed: int) -> TrainConfig:
    return RECOVERY.model_copy(update=dict(variant=variant, lambda_max=lam, seed=seed, steps=TREND_STEPS))


def test_dictionary_recovery(corpus):
    _, _, metrics = run(RECOVERY, corpus)
    assert metrics.mmcs >= 0.9
    assert metrics.explained_variance >= 0.85


def test_recovery_run_is_deterministic(corpus):
    params, _, metrics = run(RECOVERY, corpus)
    again, _ = train(RECOVERY, corpus[0], sample_memory=False)
    assert to_bytes(again) == to_bytes(params)
    AppConfig.threads = 4
    assert evaluate(again, corpus[0], corpus[1]).to_dict() == metrics.to_dict()


def test_threaded_training_is_byte_identical(corpus):
    config = RECOVERY.model_copy(update=dict(steps=TREND_STEPS, batch_size=4 * Config.CHUNK_ROWS))
    single, _ = train(config, corpus[0], sample_memory=False)
    AppConfig.threads = 4
    threaded, _ = train(config, corpus[0], sample_memory=False)
    assert to_bytes(threaded) == to_bytes(single)
    assert evaluate(threaded, corpus[0], corpus[1]).to_dict() == evaluate(single, corpus[0], corpus[1]).to_dict()


def test_sparsity_trade_off(corpus):
    l0s, evs = [], []
    for lam in TREND_LAMBDAS:
        metrics = [run(trend_config(SaeVariant.SAE_RAD, lam, seed), corpus)[2] for seed in SEEDS]
        l0s.append(np.mean([m.l0 for m in metrics]))
        evs.append(np.mean([m.explained_variance for m in metrics]))
    assert l0s[0] >= l0s[1] >= l0s[2]
    assert evs[0] >= evs[1] >= evs[2]


def test_sae_rad_beats_unconstrained_norm_at_matched_l0(corpus):
    candidates = [lam * factor for lam in TREND_LAMBDAS for factor in (0.75, 1.0, 1.25)]
    for seed in SEEDS:
        target = run(trend_config(SaeVariant.SAE_RAD, 0.05, seed), corpus)[2]
        matched = min((run(trend_config(SaeVariant.UNCONSTRAINED_NORM, lam, seed), corpus)[2] for lam in candidates),
                      key=lambda metrics: abs(metrics.l0 - target.l0))
        assert abs(matched.l0 - target.l0) <= 0.1 * target.l0
        assert target.explained_variance >= matched.explained_variance


def test_shrinkage_direction(corpus):
    baseline = run(trend_config(SaeVariant.BASELINE, 0.05, 0), corpus)[2]
    sae_rad = run(trend_config(SaeVariant.SAE_RAD, 0.05, 0), corpus)[2]
    assert baseline.shrinkage_gap >= 0.05
    assert sae_rad.shrinkage_gap < baseline.shrinkage_gap


def test_baseline_constraint_holds_at_every_logged_step(corpus):
    for lam in TREND_LAMBDAS:
        params, report, _ = run(trend_config(SaeVariant.BASELINE, lam, 0), corpus)
        assert all(record["decoder_norm_deviation"] <= 1e-10 for record in report.records)
        assert max_norm_deviation(params) <= 1e-10
