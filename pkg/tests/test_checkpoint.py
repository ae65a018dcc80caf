import struct

import numpy as np
import pytest

from ai.checkpoint import HEADER, UNTIED_FLAG, from_bytes, load_checkpoint, save_checkpoint, to_bytes
from ai.sae_params import init_params
from ai.sae_variant import SaeVariant
from errors import FormatError


def f32(params):
    return {name: value.astype(np.float32).astype(np.float64) for name, value in params.tensors()}


def test_round_trip(variant, rng, tmp_path):
    params = init_params(variant, 5, 20, rng)
    path = tmp_path / "model.saep"
    save_checkpoint(params, path)
    loaded = load_checkpoint(path)
    assert loaded.variant == variant
    assert loaded.names() == params.names()
    for name, value in f32(params).items():
        assert np.array_equal(getattr(loaded, name), value)


def test_untied_flag(rng):
    params = init_params(SaeVariant.GATED, 3, 6, rng, untied_magnitude=True)
    payload = to_bytes(params)
    assert payload[8] == SaeVariant.GATED.tag | UNTIED_FLAG
    loaded = from_bytes(payload)
    assert loaded.untied and loaded.r_mag is None
    assert loaded.names() == ["W_gate", "b_gate", "W_mag", "b_mag", "W_dec", "b_dec"]


def test_header_layout(rng):
    params = init_params(SaeVariant.BASELINE, 2, 3, rng)
    payload = to_bytes(params)
    magic, version, tag, n, m = HEADER.unpack_from(payload, 0)
    assert (magic, version, tag, n, m) == (b"SAEP", 1, 0, 2, 3)
    (count,) = struct.unpack_from("<Q", payload, HEADER.size)
    assert count == 6
    # W_gate, b_gate, W_dec, b_dec
    assert len(payload) == HEADER.size + 4 * 8 + 4 * (6 + 3 + 6 + 2)


def test_bad_magic_reports_offset(rng):
    payload = bytearray(to_bytes(init_params(SaeVariant.BASELINE, 2, 3, rng)))
    payload[:4] = b"XXXX"
    with pytest.raises(FormatError) as error:
        from_bytes(bytes(payload))
    assert error.value.offset == 0


def test_bad_version_and_tag(rng):
    payload = bytearray(to_bytes(init_params(SaeVariant.BASELINE, 2, 3, rng)))
    payload[4] = 9
    with pytest.raises(FormatError) as error:
        from_bytes(bytes(payload))
    assert error.value.offset == 4
    payload[4] = 1
    payload[8] = 7
    with pytest.raises(FormatError) as error:
        from_bytes(bytes(payload))
    assert error.value.offset == 8


def test_truncation_and_trailing_bytes(rng):
    payload = to_bytes(init_params(SaeVariant.SAE_RAD, 3, 6, rng))
    for cut in (3, HEADER.size + 4, len(payload) - 1):
        with pytest.raises(FormatError):
            from_bytes(payload[:cut])
    with pytest.raises(FormatError) as error:
        from_bytes(payload + b"\0")
    assert error.value.offset == len(payload)


def test_atomic_write_leaves_no_temp_files(rng, tmp_path):
    save_checkpoint(init_params(SaeVariant.GATED, 2, 4, rng), tmp_path / "a.saep")
    assert [path.name for path in tmp_path.iterdir()] == ["a.saep"]
