import zlib
from pathlib import Path

import msgpack  # type: ignore
import numpy as np
import pytest
from dpsnn import CheckpointError
from dpsnn.core.pseudorandom_numbers import prng
from dpsnn.io.checkpoint import (
    _HEADER,
    FORMAT_VERSION,
    MAGIC,
    dumps,
    load_checkpoint,
    loads,
    save_checkpoint,
)
from dpsnn.model import EncoderConfig, ModelConfig, SeparatorConfig
from dpsnn.model.network import forward, init
from icecream import ic  # type: ignore
from numpy.testing import assert_array_equal, assert_equal

_SMALL = ModelConfig(
    EncoderConfig(filter_length=16, stride=8, n_channels=8),
    SeparatorConfig(n_bottleneck=4, n_hidden=8, context_steps=4),
)


def _blob(_payload: bytes, _version: int = FORMAT_VERSION) -> bytes:
    return MAGIC + _HEADER.pack(_version, len(_payload), zlib.crc32(_payload)) + _payload


def test_round_trip_forward_is_bit_identical(tmp_path: Path) -> None:
    _model = init(_SMALL, 12)
    _path = tmp_path / "model.ckpt"
    save_checkpoint(_model, _path)
    _back = load_checkpoint(_path)

    assert_equal(_back.config, _model.config)
    assert_equal(list(_back.params), list(_model.params))
    for _k, _v in _model.params.items():
        assert_array_equal(_back.params[_k], _v)

    _x = 0.5 * prng(1).normal(size=(1, 1, 400))
    assert_array_equal(forward(_back, _x).enhanced.value, forward(_model, _x).enhanced.value)
    assert_equal(sorted(_p.name for _p in tmp_path.iterdir()), ["model.ckpt"])


def test_float32_model_round_trip() -> None:
    _model = init(_SMALL, 3).astype(np.float32)
    _back = loads(dumps(_model))
    for _k, _v in _model.params.items():
        assert_array_equal(_back.params[_k], _v.astype(np.float64))


def test_corruption_is_detected() -> None:
    _good = dumps(init(_SMALL, 2))
    _n_head = len(MAGIC) + _HEADER.size
    _flipped = bytearray(_good)
    _flipped[_n_head + 40] ^= 0x01

    for _bad, _match in (
        (_good[:-3], "truncated"),
        (_good + b"\x00", "truncated"),
        (bytes(_flipped), "CRC"),
        (b"NOTACKPT" + _good[8:], "Not a model checkpoint"),
        (_good[:5], "Not a model checkpoint"),
        (_blob(_good[_n_head:], FORMAT_VERSION + 1), "version"),
    ):
        with pytest.raises(CheckpointError, match=_match):
            loads(_bad)


def test_inconsistent_payload_is_rejected() -> None:
    _model = init(_SMALL, 2)
    _tensors = [[_k, _v.astype("<f4").tolist()] for _k, _v in _model.params.items()]
    _cfg = _model.config.to_flat() | {"N": 16}
    _payload = msgpack.packb({"config": _cfg, "tensors": _tensors}, use_bin_type=True)
    with pytest.raises(CheckpointError, match="valid model"):
        loads(_blob(_payload))

    with pytest.raises(CheckpointError, match="Malformed"):
        loads(_blob(msgpack.packb({"tensors": []}, use_bin_type=True)))
    ic("rejected")


def test_missing_file(tmp_path: Path) -> None:
    with pytest.raises(FileNotFoundError):
        load_checkpoint(tmp_path / "absent.ckpt")
