"""
Specifications (classes with attributes defining model dimensions and options)
and containers for the encoder-separator-decoder model.

"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass
from typing import Any, NamedTuple

import numpy as np
from attrs import Attribute, Factory, asdict, field, frozen, validators

from .. import (  # noqa: TID252
    SAMPLE_RATE,
    VERSION,
    ArrayFloat,
    ConfigError,
    GateMode,
)
from ..core.autodiff import Tensor, as_tensor  # noqa: TID252
from ..core.neurons import ALIF_B0, ALIF_BETA, PLIF_THRESHOLD, NeuronState  # noqa: TID252

__version__ = VERSION

READOUT_TAU_INIT = 2.0


def _positive(_i: Any, _a: Attribute[int], _v: int) -> None:
    if _v < 1:
        raise ConfigError(f"{_a.name} must be a positive integer, got {_v}.")


@frozen
class EncoderConfig:
    """Learned filterbank front end and its transposed-convolution decoder

    Frame :math:`t` covers samples :math:`[t s, t s + L)`. Algorithmic latency
    is :math:`L` samples: :math:`s` of buffering and :math:`L - s` of
    look-ahead.
    """

    filter_length: int = field(
        default=80, validator=[validators.instance_of(int), _positive]
    )
    """Filter length, :math:`L`, in samples"""

    stride: int = field(
        default=Factory(lambda _s: max(1, _s.filter_length // 2), takes_self=True),
        validator=validators.instance_of(int),
    )
    """Frame hop, :math:`s`, in samples; defaults to :math:`L / 2`"""

    @stride.validator
    def _check_stride(_i: EncoderConfig, _a: Attribute[int], _v: int) -> None:
        if not 1 <= _v <= _i.filter_length:
            raise ConfigError(
                f"Encoder stride must lie in [1, {_i.filter_length}], got {_v}."
            )

    n_channels: int = field(
        default=512, validator=[validators.instance_of(int), _positive]
    )
    """Encoder output channels, :math:`N`"""


@frozen
class SeparatorConfig:
    """Dimensions of the spiking separator."""

    n_bottleneck: int = field(
        default=256, validator=[validators.instance_of(int), _positive]
    )
    """Bottleneck channels, :math:`B`"""

    n_hidden: int = field(default=512, validator=[validators.instance_of(int), _positive])
    """SCNN output channels, :math:`H`; each bottleneck channel gets :math:`H/B` filters"""

    @n_hidden.validator
    def _check_n_hidden(_i: SeparatorConfig, _a: Attribute[int], _v: int) -> None:
        if _v % _i.n_bottleneck:
            raise ConfigError(
                f"SCNN channels, H = {_v}, must be a multiple of "
                f"bottleneck channels, B = {_i.n_bottleneck}."
            )

    context_steps: int = field(
        default=4, validator=[validators.instance_of(int), _positive]
    )
    """SCNN kernel length, :math:`K_{ctx}`, in frames"""


@frozen
class ModelConfig:
    """Complete model specification

    The two ablation switches drop the SCNN (the binarized bottleneck then
    feeds the SRNN) or the SRNN (the SCNN spikes then feed the readout).
    """

    encoder: EncoderConfig = field(
        default=Factory(EncoderConfig), validator=validators.instance_of(EncoderConfig)
    )
    separator: SeparatorConfig = field(
        default=Factory(SeparatorConfig),
        validator=validators.instance_of(SeparatorConfig),
    )
    use_scnn: bool = field(default=True, validator=validators.instance_of(bool))
    use_srnn: bool = field(default=True, validator=validators.instance_of(bool))

    sample_rate: int = field(default=SAMPLE_RATE, validator=validators.instance_of(int))

    @sample_rate.validator
    def _check_sample_rate(_i: ModelConfig, _a: Attribute[int], _v: int) -> None:
        if _v != SAMPLE_RATE:
            raise ConfigError(f"Only {SAMPLE_RATE} Hz audio is supported, got {_v}.")

    plif_threshold: float = field(default=PLIF_THRESHOLD, converter=float)
    alif_b0: float = field(default=ALIF_B0, converter=float)
    alif_beta: float = field(default=ALIF_BETA, converter=float)

    @property
    def srnn_inputs(self) -> int:
        """Width of the SRNN input"""
        return self.separator.n_hidden if self.use_scnn else self.separator.n_bottleneck

    @property
    def readout_inputs(self) -> int:
        """Width of the readout input"""
        return self.separator.n_bottleneck if self.use_srnn else self.srnn_inputs

    def to_flat(self) -> dict[str, Any]:
        """Flat key map, using the symbols of the run-configuration format"""
        return {
            "N": self.encoder.n_channels,
            "B": self.separator.n_bottleneck,
            "H": self.separator.n_hidden,
            "L": self.encoder.filter_length,
            "stride": self.encoder.stride,
            "K_ctx": self.separator.context_steps,
            "use_scnn": self.use_scnn,
            "use_srnn": self.use_srnn,
            "sample_rate": self.sample_rate,
            "plif_threshold": self.plif_threshold,
            "alif_b0": self.alif_b0,
            "alif_beta": self.alif_beta,
        }

    @classmethod
    def from_flat(cls, _flat: Mapping[str, Any], /) -> ModelConfig:
        """Inverse of :meth:`to_flat`; missing keys take their defaults

        Raises
        ------
        ConfigError
            On unknown keys or invalid values.

        """
        _known = set(cls().to_flat())
        if _unknown := sorted(set(_flat) - _known):
            raise ConfigError(f"Unknown model configuration keys: {', '.join(_unknown)}.")
        _enc = {
            _k: _flat[_s]
            for _s, _k in (("L", "filter_length"), ("stride", "stride"), ("N", "n_channels"))
            if _s in _flat
        }
        _sep = {
            _k: _flat[_s]
            for _s, _k in (("B", "n_bottleneck"), ("H", "n_hidden"), ("K_ctx", "context_steps"))
            if _s in _flat
        }
        _rest = {
            _k: _flat[_k]
            for _k in (
                "use_scnn",
                "use_srnn",
                "sample_rate",
                "plif_threshold",
                "alif_b0",
                "alif_beta",
            )
            if _k in _flat
        }
        try:
            return cls(EncoderConfig(**_enc), SeparatorConfig(**_sep), **_rest)
        except (TypeError, ValueError) as _err:
            raise ConfigError(f"Invalid model configuration: {_err}") from _err

    def as_dict(self) -> dict[str, Any]:
        return asdict(self)


@frozen
class SuppressionGate:
    """Activation suppression with a learnable threshold

    See :class:`dpsnn.GateMode` for the two behaviors.
    """

    mode: GateMode = field(validator=validators.instance_of(GateMode))
    threshold: Tensor = field(converter=as_tensor)

    @threshold.validator
    def _check_threshold(_i: SuppressionGate, _a: Attribute[Tensor], _v: Tensor) -> None:
        if not np.isfinite(_v.value).all():
            raise ValueError("Suppression threshold must be finite.")


class SeparatorState(NamedTuple):
    """Everything the separator carries from one frame to the next."""

    scnn: NeuronState
    srnn: NeuronState
    readout_u: Tensor
    context: ArrayFloat
    """The last :math:`K_{ctx} - 1` binarized bottleneck frames, :code:`[batch, B, K-1]`"""

    @classmethod
    def zeros(
        cls, _cfg: ModelConfig, _batch: int, /, *, dtype: type[np.floating] = np.float64
    ) -> SeparatorState:
        _sep = _cfg.separator
        return cls(
            NeuronState.zeros((_batch, _sep.n_hidden), dtype=dtype),
            NeuronState.zeros((_batch, _sep.n_bottleneck), dtype=dtype),
            Tensor(np.zeros((_batch, _sep.n_bottleneck), dtype=dtype)),
            np.zeros((_batch, _sep.n_bottleneck, _sep.context_steps - 1), dtype=dtype),
        )

    def detached(self) -> SeparatorState:
        return SeparatorState(
            self.scnn.detached(),
            self.srnn.detached(),
            Tensor(self.readout_u.value),
            self.context,
        )


@dataclass(slots=True, frozen=True)
class SpikeStats:
    """Activity tallies from one or more forward passes

    Counts are totals over batch and frames; densities are per neuron per frame.
    """

    batch: int
    frames: int
    n_bottleneck: int
    n_hidden: int
    use_scnn: bool
    use_srnn: bool
    bottleneck_ones: int = 0
    """Ones in the binarized bottleneck output"""
    scnn_spikes: int = 0
    srnn_spikes: int = 0
    readout_nonzero: int = 0
    """Non-zero readout potentials surviving suppression"""

    @property
    def slots(self) -> int:
        """Batch-frames observed"""
        return self.batch * self.frames

    @property
    def bottleneck_density(self) -> float:
        return self.bottleneck_ones / max(1, self.slots * self.n_bottleneck)

    @property
    def spike_density(self) -> float:
        """Spikes per spiking neuron per frame, over the SCNN and SRNN"""
        _neurons = self.n_hidden * self.use_scnn + self.n_bottleneck * self.use_srnn
        return (self.scnn_spikes + self.srnn_spikes) / max(1, self.slots * _neurons)

    def __add__(self, _other: SpikeStats, /) -> SpikeStats:
        """Pool tallies over frames of the same batch."""
        if (self.batch, self.n_bottleneck, self.n_hidden) != (
            _other.batch,
            _other.n_bottleneck,
            _other.n_hidden,
        ):
            raise ValueError("Cannot pool spike statistics of different models or batches.")
        return SpikeStats(
            self.batch,
            self.frames + _other.frames,
            self.n_bottleneck,
            self.n_hidden,
            self.use_scnn,
            self.use_srnn,
            self.bottleneck_ones + _other.bottleneck_ones,
            self.scnn_spikes + _other.scnn_spikes,
            self.srnn_spikes + _other.srnn_spikes,
            self.readout_nonzero + _other.readout_nonzero,
        )


@dataclass(slots=True, frozen=True)
class ParamCount:
    """Learnable scalars per layer, and in total."""

    per_layer: dict[str, int]
    total: int
