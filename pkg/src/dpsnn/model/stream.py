"""
Frame-by-frame streaming inference with carried neuron, context and
overlap-add state.

The first output sample is emitted once :math:`L` input samples have arrived;
each further frame advances the output by one stride. Concatenating the output
of any sequence of :func:`push_samples` calls, followed by :func:`flush`,
reproduces the offline :func:`dpsnn.model.network.forward` output.

"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from attrs import define, field

from .. import SAMPLE_RATE, VERSION, ArrayFloat, ConfigError, DimensionError  # noqa: TID252
from ..core.autodiff import Tensor  # noqa: TID252
from . import EncoderConfig, ModelConfig, SeparatorState
from .layers import decode
from .network import DpsnnModel, bind_params, features, separate

__version__ = VERSION


@dataclass(slots=True, frozen=True)
class LatencyReport:
    """Algorithmic latency, the sum of buffering and look-ahead, in milliseconds."""

    buffering_ms: float
    lookahead_ms: float
    algorithmic_ms: float


def latency(_cfg: EncoderConfig, _sample_rate: int = SAMPLE_RATE, /) -> LatencyReport:
    """Buffering of one stride plus look-ahead of :math:`L - s` samples.

    Raises
    ------
    ConfigError
        If the sample rate is not positive.

    """
    if _sample_rate <= 0:
        raise ConfigError(f"Sample rate must be positive, got {_sample_rate}.")
    _buf = 1000 * _cfg.stride / _sample_rate
    _ahead = 1000 * (_cfg.filter_length - _cfg.stride) / _sample_rate
    return LatencyReport(_buf, _ahead, _buf + _ahead)


@define
class StreamState:
    """Everything one stream carries between calls; sizes are fixed by the config."""

    config: ModelConfig
    dtype: np.dtype[np.floating] = field(converter=np.dtype)
    pending: ArrayFloat = field(init=False)
    """Input samples not yet consumed by a complete frame, fewer than :math:`L` between calls"""
    separator: SeparatorState = field(init=False)
    ola_tail: ArrayFloat = field(init=False)
    """Decoded contributions to the next :math:`L - s` output samples"""
    frames_processed: int = field(init=False, default=0)

    def __attrs_post_init__(self) -> None:
        reset(self)

    @classmethod
    def for_model(cls, _model: DpsnnModel, /) -> StreamState:
        return cls(_model.config, _model.dtype)


def reset(_state: StreamState, /) -> StreamState:
    """Zero every buffer in place; returns the same state."""
    _enc = _state.config.encoder
    _state.pending = np.zeros(0, dtype=_state.dtype)
    _state.separator = SeparatorState.zeros(_state.config, 1, dtype=_state.dtype.type)
    _state.ola_tail = np.zeros(_enc.filter_length - _enc.stride, dtype=_state.dtype)
    _state.frames_processed = 0
    return _state


def _check_model(_state: StreamState, _model: DpsnnModel, /) -> None:
    if _state.config != _model.config:
        raise ConfigError("Stream state was created for a different model configuration.")


def push_samples(
    _state: StreamState, _model: DpsnnModel, _samples: ArrayFloat, /
) -> ArrayFloat:
    """Consume samples and return every output sample that became final.

    Parameters
    ----------
    _state
        Stream state, updated in place.
    _model
        Model the state was created for.
    _samples
        Mono samples, 1-D, of any length including zero.

    Returns
    -------
        One stride of output per frame completed by these samples.

    Raises
    ------
    ConfigError
        If the state belongs to a different model configuration.
    DimensionError
        If the samples are not 1-D.

    """
    _check_model(_state, _model)
    _samples = np.asarray(_samples)
    if _samples.ndim != 1:
        raise DimensionError(f"Stream input must be 1-D, got shape {_samples.shape}.")
    _l, _s = _model.config.encoder.filter_length, _model.config.encoder.stride

    _buf = np.concatenate([_state.pending, _samples.astype(_state.dtype, copy=False)])
    _out: list[ArrayFloat] = []
    _p = bind_params(_model)
    _start = 0
    while _buf.size - _start >= _l:
        _frame = Tensor(_buf[_start : _start + _l].reshape(1, 1, _l))
        _feats = features(_model, _p, _frame)
        _mask, _, _, _, _state.separator = separate(_model, _p, _feats, _state.separator)
        _decoded = decode(_mask * _feats, _p["decoder.kernel"], stride=_s).value[0, 0]

        _acc = _decoded.copy()
        _acc[: _l - _s] += _state.ola_tail
        _out.append(_acc[:_s])
        _state.ola_tail = _acc[_s:]
        _state.frames_processed += 1
        _start += _s
    _state.pending = _buf[_start:].copy()
    return np.concatenate(_out) if _out else np.zeros(0, dtype=_state.dtype)


def flush(_state: StreamState, /) -> ArrayFloat:
    """Emit the final :math:`L - s` overlap-add samples and reset the stream.

    Returns an empty array if no frame was processed since the last reset.
    """
    _tail = _state.ola_tail.copy() if _state.frames_processed else np.zeros(0, _state.dtype)
    reset(_state)
    return _tail


def measure_rtf(
    _model: DpsnnModel, _samples: ArrayFloat, /, *, chunk: int | None = None
) -> float:
    """Real-time factor: wall-clock processing time over audio duration.

    Parameters
    ----------
    _model
        The model.
    _samples
        Mono input samples.
    chunk
        Samples per :func:`push_samples` call; one stride if omitted.

    """
    _chunk = chunk or _model.config.encoder.stride
    if _chunk < 1:
        raise ConfigError(f"Chunk length must be positive, got {_chunk}.")
    _samples = np.asarray(_samples)
    if not _samples.size:
        raise DimensionError("Cannot measure the real-time factor of empty audio.")
    _state = StreamState.for_model(_model)
    _t0 = time.perf_counter()
    for _i in range(0, _samples.size, _chunk):
        push_samples(_state, _model, _samples[_i : _i + _chunk])
    flush(_state)
    _elapsed = time.perf_counter() - _t0
    return _elapsed / (_samples.size / _model.config.sample_rate)
