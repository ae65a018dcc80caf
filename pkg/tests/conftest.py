import numpy as np
import pytest

from ai.sae_params import SaeParams, init_params
from ai.sae_variant import SaeVariant
from config.app_config import AppConfig
from data.manifest import Manifest


@pytest.fixture(autouse=True)
def single_thread():
    AppConfig.threads = 1
    yield
    AppConfig.threads = 1


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(params=list(SaeVariant), ids=lambda variant: variant.value)
def variant(request) -> SaeVariant:
    return request.param


@pytest.fixture
def small_params(variant, rng) -> SaeParams:
    return init_params(variant, 4, 8, rng)


@pytest.fixture
def manifest() -> Manifest:
    return Manifest.from_rows([
        {"id": 3, "report": "Mild cardiomegaly. Tortuous aorta."},
        {"id": 7, "report": "Enlarged cardiac silhouette."},
        {"id": 11, "report": "No acute findings."},
    ])
