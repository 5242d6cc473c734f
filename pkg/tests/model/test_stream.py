import numpy as np
import pytest
from dpsnn import ConfigError, DimensionError
from dpsnn.core.pseudorandom_numbers import prng
from dpsnn.model import EncoderConfig, ModelConfig, SeparatorConfig
from dpsnn.model.network import DpsnnModel, forward, init
from dpsnn.model.stream import (
    StreamState,
    flush,
    latency,
    measure_rtf,
    push_samples,
    reset,
)
from icecream import ic  # type: ignore
from numpy.testing import assert_allclose, assert_array_equal, assert_equal

_CFG = ModelConfig(
    EncoderConfig(filter_length=16, stride=8, n_channels=8),
    SeparatorConfig(n_bottleneck=4, n_hidden=8, context_steps=4),
)
_DESK = ModelConfig(
    EncoderConfig(filter_length=80, stride=40, n_channels=64),
    SeparatorConfig(n_bottleneck=32, n_hidden=64, context_steps=4),
)


def _stream(_model: DpsnnModel, _x: np.ndarray, _chunks: list[int]) -> np.ndarray:
    _st = StreamState.for_model(_model)
    _out, _i = [], 0
    for _c in _chunks:
        _out.append(push_samples(_st, _model, _x[_i : _i + _c]))
        _i += _c
    _out.append(flush(_st))
    return np.concatenate(_out)


@pytest.mark.parametrize(
    "_l, _expected",
    ((80, (2.5, 2.5, 5.0)), (40, (1.25, 1.25, 2.5)), (160, (5.0, 5.0, 10.0))),
)
def test_latency(_l: int, _expected: tuple[float, float, float]) -> None:
    _rep = latency(EncoderConfig(filter_length=_l), 16000)
    assert_allclose(
        (_rep.buffering_ms, _rep.lookahead_ms, _rep.algorithmic_ms), _expected, rtol=1e-12
    )
    with pytest.raises(ConfigError):
        latency(EncoderConfig(), 0)


@pytest.mark.parametrize("_chunking", ("single", "ones", "random"))
def test_stream_matches_offline(_chunking: str) -> None:
    _model = init(_CFG, 5)
    _x = 0.5 * prng(3).normal(size=203)
    _offline = forward(_model, _x.reshape(1, 1, -1)).enhanced.value[0, 0]

    match _chunking:
        case "single":
            _chunks = [_x.size]
        case "ones":
            _chunks = [1] * _x.size
        case _:
            _rng = prng(4)
            _chunks = []
            while sum(_chunks) < _x.size:
                _chunks.append(int(_rng.integers(0, 30)))
    _streamed = _stream(_model, _x, _chunks)
    ic(_streamed.size, _offline.size)
    assert_equal(_streamed.size, _offline.size)
    assert_allclose(_streamed, _offline, rtol=0, atol=1e-9)


def test_stream_float32() -> None:
    _model = init(_CFG, 5).astype(np.float32)
    _x = (0.5 * prng(3).normal(size=120)).astype(np.float32)
    _offline = forward(_model, _x.reshape(1, 1, -1)).enhanced.value[0, 0]
    _st = StreamState.for_model(_model)
    assert_equal(_st.pending.dtype, np.float32)
    _streamed = _stream(_model, _x, [7] * 18)
    assert_equal(_streamed.dtype, np.float32)
    assert_equal(_streamed.size, _offline.size)


@pytest.mark.parametrize("_chunk", (1, 7, 160, 400))
def test_stream_float32_matches_offline(_chunk: int) -> None:
    _model = init(_DESK, 11).astype(np.float32)
    _clips = (0.3 * prng(12).normal(size=(20, 16000))).astype(np.float32)
    _worst = 0.0
    for _x in _clips:
        _offline = forward(_model, _x.reshape(1, 1, -1)).enhanced.value[0, 0]
        _streamed = _stream(_model, _x, [_chunk] * -(-_x.size // _chunk))
        assert_equal(_streamed.dtype, np.float32)
        assert_equal(_streamed.size, _offline.size)
        _worst = max(_worst, float(np.abs(_streamed - _offline).max()))
    ic(_worst)
    assert _worst <= 1e-5


def test_first_output_after_one_frame() -> None:
    _model = init(_CFG, 5)
    _st = StreamState.for_model(_model)
    _x = prng(3).normal(size=40)
    assert_equal(push_samples(_st, _model, _x[:0]).size, 0)
    assert_equal(push_samples(_st, _model, _x[:15]).size, 0)
    assert_equal(push_samples(_st, _model, _x[15:16]).size, 8)
    assert_equal(push_samples(_st, _model, _x[16:24]).size, 8)
    assert_equal(_st.frames_processed, 2)
    assert_equal(_st.pending.size, 8)
    assert_equal(flush(_st).size, 8)


def test_reset_and_isolation() -> None:
    _model = init(_CFG, 5)
    _x = prng(3).normal(size=100)
    _y = prng(8).normal(size=100)

    _fresh = _stream(_model, _x, [100])

    _st = StreamState.for_model(_model)
    push_samples(_st, _model, _y)
    reset(reset(_st))
    assert_equal(_st.frames_processed, 0)
    assert_array_equal(_st.ola_tail, 0.0)
    assert_array_equal(_st.separator.context, 0.0)
    _again = np.concatenate([push_samples(_st, _model, _x), flush(_st)])
    assert_array_equal(_again, _fresh)

    # interleaved streams do not interfere
    _a, _b = StreamState.for_model(_model), StreamState.for_model(_model)
    _out_a, _out_b = [], []
    for _i in range(0, 100, 10):
        _out_a.append(push_samples(_a, _model, _x[_i : _i + 10]))
        _out_b.append(push_samples(_b, _model, _y[_i : _i + 10]))
    _out_a.append(flush(_a))
    assert_array_equal(np.concatenate(_out_a), _fresh)


def test_stream_rejects_mismatch() -> None:
    _model = init(_CFG, 5)
    _other = init(ModelConfig(EncoderConfig(filter_length=16, stride=8, n_channels=8)), 5)
    _st = StreamState.for_model(_model)
    with pytest.raises(ConfigError):
        push_samples(_st, _other, np.zeros(16))
    with pytest.raises(DimensionError):
        push_samples(_st, _model, np.zeros((2, 16)))


def test_measure_rtf() -> None:
    _model = init(_CFG, 5)
    _rtf = measure_rtf(_model, prng(3).normal(size=1600), chunk=64)
    ic(_rtf)
    assert _rtf > 0
