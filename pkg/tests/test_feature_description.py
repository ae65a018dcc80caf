import asyncio

import numpy as np
import pytest

from ai.sae_params import init_params
from ai.sae_variant import SaeVariant
from data.activation_dataset import ActivationDataset
from errors import (BackendError, DescriberError, EmptyFeatureError, FormatError, OutOfRangeError, ParseError,
                    PipelineError, StaleStoreError)
from helpers import golden, identity_params
from services.feature_description_service import (FeatureRecord, build_describe_prompt, describe_feature,
                                                  describe_features, parse_description, top_k, top_k_all)
from services.feature_store import FeatureStore
from services.mock_backend import MockBackend

SAMPLE_REPLY = (
    "Let me analyze these reports step by step:\n"
    "1. Report 1 mentions an enlarged cardiac silhouette.\n"
    "2. Report 2 mentions mild cardiomegaly.\n"
    "Both reports describe the size of the heart.\n"
    "*This feature represents an enlarged cardiac silhouette and cardiomegaly."
)


def test_top_k_single_example():
    params = identity_params(SaeVariant.BASELINE, 2)
    data = ActivationDataset(np.array([[0.5, 0.0], [2.0, 1.0], [1.0, 3.0]]), ids=[10, 20, 30])
    record = top_k(params, data, 0, k=1)
    assert record.top_examples == [(20, 2.0)]
    assert np.allclose(record.direction, [1.0, 0.0])


def test_top_k_is_sorted_and_excludes_non_firing():
    params = identity_params(SaeVariant.UNCONSTRAINED_NORM, 2)
    data = ActivationDataset(np.array([[0.5, 0.0], [-2.0, 1.0], [1.0, 3.0]]), ids=[10, 20, 30])
    record = top_k(params, data, 0, k=10)
    assert record.top_ids == [30, 10]


def test_top_k_ties_go_to_lowest_id():
    params = identity_params(SaeVariant.GATED, 2)
    data = ActivationDataset(np.array([[1.0, 0.0], [1.0, 0.0], [2.0, 0.0]]), ids=[9, 4, 6])
    assert top_k(params, data, 0, k=2).top_ids == [6, 4]


def test_top_k_errors():
    params = identity_params(SaeVariant.BASELINE, 2)
    data = ActivationDataset(np.array([[1.0, -1.0]]))
    with pytest.raises(EmptyFeatureError):
        top_k(params, data, 1)
    with pytest.raises(OutOfRangeError):
        top_k(params, data, 2)
    with pytest.raises(ValueError):
        top_k(params, data, 0, k=0)


def test_top_k_all_matches_per_feature(variant, rng):
    params = init_params(variant, 4, 10, rng)
    # spans several chunks
    data = ActivationDataset(rng.standard_normal((700, 4)), ids=rng.permutation(5000)[:700])
    records = top_k_all(params, data, k=5)
    for i in range(params.m):
        try:
            expected = top_k(params, data, i, k=5)
        except EmptyFeatureError:
            assert i not in records
            continue
        assert records[i].top_ids == expected.top_ids
        assert np.allclose([a for _, a in records[i].top_examples], [a for _, a in expected.top_examples])


def test_parse_description():
    assert parse_description(SAMPLE_REPLY) == \
        "This feature represents an enlarged cardiac silhouette and cardiomegaly."
    assert parse_description("*first *  second  \n") == "second"
    with pytest.raises(ParseError):
        parse_description("no separator here")
    with pytest.raises(ParseError):
        parse_description("trailing *   ")


def test_parse_full_describer_reply():
    assert parse_description(golden("describer_reply.txt")) == (
        "This feature represents an enlarged cardiac silhouette (cardiomegaly) in conjunction with thoracic aortic "
        "abnormalities, particularly tortuosity and calcification.")


def test_describe_prompt_matches_golden(manifest):
    record = FeatureRecord(index=4, top_examples=[(7, 2.0), (3, 1.0)])
    assert build_describe_prompt(record, manifest) == golden("describe_two_reports.txt")
    with pytest.raises(PipelineError):
        build_describe_prompt(FeatureRecord(index=4, top_examples=[]), manifest)


def test_describe_retries_then_succeeds(manifest):
    describer = MockBackend([BackendError("timeout"), "no asterisk", SAMPLE_REPLY], echo=False)
    record = FeatureRecord(index=1, top_examples=[(3, 1.0)])
    described = asyncio.run(describe_feature(record, describer, manifest))
    assert described.description.endswith("cardiomegaly.")
    assert described.raw_describer_output == SAMPLE_REPLY
    assert len(describer.prompts) == 3
    assert record.description is None


def test_describe_gives_up_after_retries(manifest):
    describer = MockBackend(["a", "b", "c", SAMPLE_REPLY], echo=False)
    with pytest.raises(DescriberError):
        asyncio.run(describe_feature(FeatureRecord(index=1, top_examples=[(3, 1.0)]), describer, manifest))
    assert len(describer.prompts) == 3


def test_describe_features_in_index_order(manifest):
    records = [FeatureRecord(index=i, top_examples=[(example_id, 1.0)]) for i, example_id in ((5, 11), (2, 7), (9, 3))]
    described = asyncio.run(describe_features(records, MockBackend(), manifest, max_in_flight=2))
    assert [record.index for record in described] == [2, 5, 9]
    assert described[0].description == "This feature represents Enlarged cardiac silhouette."


def test_feature_store_round_trip_and_staleness(tmp_path):
    store = FeatureStore(tmp_path / "features.jsonl")
    records = [FeatureRecord(index=3, top_examples=[(7, 2.5)], description="b", raw_describer_output="*b"),
               FeatureRecord(index=1, top_examples=[(3, 1.0), (11, 0.5)], description="a")]
    store.save(records, "abc")
    loaded = store.load("abc")
    assert sorted(loaded) == [1, 3]
    assert loaded[1].top_examples == [(3, 1.0), (11, 0.5)]
    assert store.descriptions("abc") == {1: "a", 3: "b"}
    with pytest.raises(StaleStoreError):
        store.load("def")
    (tmp_path / "features.jsonl").write_text("{not json\n")
    with pytest.raises(FormatError):
        store.load()
