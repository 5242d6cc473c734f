"""
The encoder-separator-decoder network: parameter layout, initialization,
the offline forward pass and parameter counting.

"""

from __future__ import annotations

import logging
from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np
from attrs import Attribute, field, frozen, validators
from scipy import signal  # type: ignore

from .. import (  # noqa: TID252
    DEFAULT_DTYPE,
    VERSION,
    ArrayDouble,
    ArrayFloat,
    ConfigError,
    DimensionError,
    GateMode,
)
from ..core import autodiff as ad  # noqa: TID252
from ..core.autodiff import Tape, Tensor  # noqa: TID252
from ..core.conv_ops import channel_layernorm, conv1d  # noqa: TID252
from ..core.pseudorandom_numbers import keyed_seed_seq, prng  # noqa: TID252
from . import (
    READOUT_TAU_INIT,
    ModelConfig,
    ParamCount,
    SeparatorState,
    SpikeStats,
    SuppressionGate,
)
from .layers import (
    decode,
    encode,
    mask_head,
    readout_forward,
    scnn_forward,
    srnn_forward,
    suppress_binarize,
    suppress_pass_above,
)

__version__ = VERSION

logger = logging.getLogger(__name__)

ALIF_TAU_MIN = 1.01
"""Smallest ALIF time constant, in steps, kept after initialization and updates"""

READOUT_TAU_MIN = 1.0

MASK_INIT_SCALE = 0.1
"""Mask-head weights start at this fraction of the uniform bound, so the
initial mask is close to constant"""

LAYERS = (
    "encoder",
    "norm",
    "bottleneck",
    "scnn",
    "srnn",
    "readout",
    "mask",
    "decoder",
)

# stream keys for per-tensor seeding, stable across ablation variants
_PARAM_KEYS = {
    _n: _i
    for _i, _n in enumerate((
        "encoder.kernel",
        "norm.gain",
        "norm.bias",
        "bottleneck.kernel",
        "bottleneck.threshold",
        "scnn.kernel",
        "scnn.bias",
        "scnn.plif_a",
        "srnn.w_in",
        "srnn.w_rec",
        "srnn.tau_m",
        "srnn.tau_adp",
        "readout.weight",
        "readout.tau",
        "readout.threshold",
        "mask.kernel",
        "mask.bias",
        "decoder.kernel",
    ))
}


def param_shapes(_cfg: ModelConfig, /) -> dict[str, tuple[int, ...]]:
    """Names and shapes of the learnable tensors of a model, in a fixed order."""
    _n, _l = _cfg.encoder.n_channels, _cfg.encoder.filter_length
    _b, _h = _cfg.separator.n_bottleneck, _cfg.separator.n_hidden
    _shapes: dict[str, tuple[int, ...]] = {
        "encoder.kernel": (_n, 1, _l),
        "norm.gain": (_n,),
        "norm.bias": (_n,),
        "bottleneck.kernel": (_b, _n, 1),
        "bottleneck.threshold": (1,),
    }
    if _cfg.use_scnn:
        _shapes |= {
            "scnn.kernel": (_h, 1, _cfg.separator.context_steps),
            "scnn.bias": (_h,),
            "scnn.plif_a": (1,),
        }
    if _cfg.use_srnn:
        _shapes |= {
            "srnn.w_in": (_b, _cfg.srnn_inputs),
            "srnn.w_rec": (_b, _b),
            "srnn.tau_m": (_b,),
            "srnn.tau_adp": (_b,),
        }
    return _shapes | {
        "readout.weight": (_b, _cfg.readout_inputs),
        "readout.tau": (1,),
        "readout.threshold": (1,),
        "mask.kernel": (_n, _b, 1),
        "mask.bias": (_n,),
        "decoder.kernel": (_n, 1, _l),
    }


@frozen
class DpsnnModel:
    """Model configuration and its learnable tensors

    Parameters are held by name, e.g. :code:`"srnn.w_rec"`; see
    :func:`param_shapes` for the layout implied by the configuration.
    """

    config: ModelConfig = field(validator=validators.instance_of(ModelConfig))

    params: dict[str, ArrayFloat] = field(
        converter=lambda _p: {_k: np.asarray(_v) for _k, _v in _p.items()}
    )

    @params.validator
    def _check_params(
        _i: DpsnnModel, _a: Attribute[dict[str, ArrayFloat]], _v: dict[str, ArrayFloat]
    ) -> None:
        _shapes = param_shapes(_i.config)
        if set(_v) != set(_shapes):
            _diff = sorted(set(_v) ^ set(_shapes))
            raise ConfigError(f"Parameter names do not match the configuration: {_diff}.")
        for _name, _shape in _shapes.items():
            if _v[_name].shape != _shape:
                raise DimensionError(
                    f"Parameter {_name!r} has shape {_v[_name].shape}, expected {_shape}."
                )

    @property
    def dtype(self) -> np.dtype[np.floating]:
        return self.params["encoder.kernel"].dtype

    def astype(self, _dtype: type[np.floating], /) -> DpsnnModel:
        """Copy with every parameter cast, e.g. to float32 for inference."""
        return DpsnnModel(
            self.config, {_k: _v.astype(_dtype) for _k, _v in self.params.items()}
        )

    def replace_params(self, _params: Mapping[str, ArrayFloat], /) -> DpsnnModel:
        return DpsnnModel(self.config, dict(_params))


def fourier_codec(_n: int, _l: int, _s: int, /) -> tuple[ArrayDouble, ArrayDouble]:
    """Analysis and synthesis kernels of a sign-split, windowed Fourier filterbank

    Channel pairs :math:`(2j, 2j + 1)` hold :math:`\\pm` the :math:`j`-th real
    Fourier basis of length :math:`L` (the constant, then cosine and sine by
    rising frequency) under a square-root periodic Hann window. With ReLU
    features, decoding the unmasked encoder output at hop :math:`s` returns
    the projection of the input on the first :math:`\\min(N / 2, L)` bases,
    exactly so where the overlap-add window sum is flat (:math:`L / s`
    integral and at least 2) and away from the first and last frame.

    Returns
    -------
        Encoder and decoder kernels, :code:`[N, 1, L]`; rows past the last
        pair are zero.

    """
    _win = np.sqrt(signal.get_window("hann", _l))
    _t = 2 * np.pi * np.arange(_l) / _l
    _bases = [np.ones(_l) / np.sqrt(_l)]
    for _k in range(1, _l // 2 + 1):
        _norm = np.sqrt((1 if 2 * _k == _l else 2) / _l)
        _bases.append(_norm * np.cos(_k * _t))
        if 2 * _k < _l:
            _bases.append(_norm * np.sin(_k * _t))
    _bases = _bases[: min(_n // 2, _l)]

    _enc, _dec = np.zeros((_n, 1, _l)), np.zeros((_n, 1, _l))
    _gain = _s / np.sum(_win**2)
    for _j, _b in enumerate(_bases):
        _enc[2 * _j, 0], _enc[2 * _j + 1, 0] = _win * _b, -_win * _b
        _dec[2 * _j, 0], _dec[2 * _j + 1, 0] = _gain * _win * _b, -_gain * _win * _b
    return _enc, _dec


def init(_cfg: ModelConfig, _seed: int, /) -> DpsnnModel:
    """Draw a reproducible model for the given configuration

    The encoder and decoder start as the filterbank of :func:`fourier_codec`,
    so the untrained codec reconstructs its input up to the band covered by
    the available channel pairs. Encoder rows beyond the last pair, and every
    other weight, are uniform on :math:`\\pm\\sqrt{6 / \\mathrm{fan\\_in}}`,
    with the mask head further scaled by :data:`MASK_INIT_SCALE`. ALIF time
    constants are drawn from :math:`N(20, 5)` and :math:`N(200, 50)` steps and
    clamped to at least :data:`ALIF_TAU_MIN`; the PLIF parameter starts at 0
    (:math:`\\tau_m = 2`), the readout time constant at
    :data:`dpsnn.model.READOUT_TAU_INIT`, suppression thresholds and biases at
    0, and layer-norm gains at 1. Every value is rounded to float32 precision.

    Parameters
    ----------
    _cfg
        Model configuration.
    _seed
        Non-negative integer seed; each tensor draws from its own keyed stream.

    Returns
    -------
        Model with float64 parameters.

    """
    _enc = _cfg.encoder
    _enc_k, _dec_k = fourier_codec(_enc.n_channels, _enc.filter_length, _enc.stride)
    _n_fourier = 2 * min(_enc.n_channels // 2, _enc.filter_length)
    _params: dict[str, ArrayFloat] = {}
    for _name, _shape in param_shapes(_cfg).items():
        _rng = prng(keyed_seed_seq(_seed, _PARAM_KEYS[_name]))
        match _name.rsplit(".", 1)[-1]:
            case "kernel" | "weight" | "w_in" | "w_rec":
                _bound = np.sqrt(6 / int(np.prod(_shape[1:])))
                _v = _rng.uniform(-_bound, _bound, _shape)
                if _name == "encoder.kernel":
                    _v[:_n_fourier] = _enc_k[:_n_fourier]
                elif _name == "decoder.kernel":
                    _v = _dec_k
                elif _name == "mask.kernel":
                    _v *= MASK_INIT_SCALE
            case "tau_m":
                _v = np.maximum(_rng.normal(20.0, 5.0, _shape), ALIF_TAU_MIN)
            case "tau_adp":
                _v = np.maximum(_rng.normal(200.0, 50.0, _shape), ALIF_TAU_MIN)
            case "tau":
                _v = np.full(_shape, READOUT_TAU_INIT)
            case "gain":
                _v = np.ones(_shape)
            case _:
                _v = np.zeros(_shape)
        _params[_name] = _v.astype(np.float32).astype(DEFAULT_DTYPE)
    return DpsnnModel(_cfg, _params)


def project_params(_params: Mapping[str, ArrayFloat], /) -> dict[str, ArrayFloat]:
    """Clamp learnable time constants back into their valid domain."""
    _out = dict(_params)
    for _name in ("srnn.tau_m", "srnn.tau_adp"):
        if _name in _out:
            _out[_name] = np.maximum(_out[_name], ALIF_TAU_MIN)
    _out["readout.tau"] = np.maximum(_out["readout.tau"], READOUT_TAU_MIN)
    return _out


def count_params(_model: DpsnnModel, /, *, exclude_codec: bool = False) -> ParamCount:
    """Learnable scalars per layer

    Parameters
    ----------
    _model
        The model.
    exclude_codec
        If True, leave out the encoder and decoder filterbanks.

    """
    _per_layer = dict.fromkeys(LAYERS, 0)
    for _name, _v in _model.params.items():
        _per_layer[_name.split(".", 1)[0]] += _v.size
    if exclude_codec:
        del _per_layer["encoder"], _per_layer["decoder"]
    return ParamCount(_per_layer, sum(_per_layer.values()))


@dataclass(slots=True, frozen=True)
class ForwardResult:
    """Outputs of :func:`forward`."""

    enhanced: Tensor
    """Enhanced waveform, :code:`[batch, 1, (T_frames - 1) s + L]`"""
    stats: SpikeStats
    suppressed_bn: Tensor
    """Binarized bottleneck output, :code:`[batch, B, T_frames]`"""
    suppressed_ro: Tensor
    """Readout potentials after pass-above suppression, :code:`[batch, B, T_frames]`"""
    mask: Tensor
    state: SeparatorState
    """Separator state after the last frame"""


def bind_params(
    _model: DpsnnModel, _tape: Tape | None = None, /
) -> dict[str, Tensor]:
    """Wrap parameters as tensors, registering them on the tape if one is given."""
    if _tape is None:
        return {_k: Tensor(_v) for _k, _v in _model.params.items()}
    return {_k: _tape.parameter(_k, _v) for _k, _v in _model.params.items()}


def features(
    _model: DpsnnModel, _p: Mapping[str, Tensor], _wave: Tensor, /
) -> Tensor:
    """Encoder output, :code:`[batch, N, T_frames]`."""
    return encode(_wave, _p["encoder.kernel"], stride=_model.config.encoder.stride)


def separate(
    _model: DpsnnModel,
    _p: Mapping[str, Tensor],
    _feats: Tensor,
    _state: SeparatorState,
    /,
    *,
    unit_mask: bool = False,
) -> tuple[Tensor, Tensor, Tensor, SpikeStats, SeparatorState]:
    """Run the separator over encoder features.

    Returns
    -------
        Mask, binarized bottleneck, suppressed readout, spike tallies and the
        separator state after the last frame.

    """
    _cfg = _model.config
    _normed = channel_layernorm(_feats, _p["norm.gain"], _p["norm.bias"])
    _bn = suppress_binarize(
        conv1d(_normed, _p["bottleneck.kernel"]),
        SuppressionGate(GateMode.BINARIZE, _p["bottleneck.threshold"]),
    )

    _x, _scnn_st, _srnn_st, _context = _bn, _state.scnn, _state.srnn, _state.context
    _scnn_spikes = _srnn_spikes = 0
    if _cfg.use_scnn:
        _x, _scnn_st, _context = scnn_forward(
            _x,
            _p["scnn.kernel"],
            _p["scnn.bias"],
            _p["scnn.plif_a"],
            _scnn_st,
            _context,
            theta=_cfg.plif_threshold,
        )
        _scnn_spikes = int(_x.value.sum())
    if _cfg.use_srnn:
        _x, _srnn_st = srnn_forward(
            _x,
            _p["srnn.w_in"],
            _p["srnn.w_rec"],
            _p["srnn.tau_m"],
            _p["srnn.tau_adp"],
            _srnn_st,
            b0=_cfg.alif_b0,
            beta=_cfg.alif_beta,
        )
        _srnn_spikes = int(_x.value.sum())

    _ro, _ro_u = readout_forward(
        _x, _p["readout.weight"], _p["readout.tau"], _state.readout_u
    )
    _ro = suppress_pass_above(
        _ro, SuppressionGate(GateMode.PASS_ABOVE, _p["readout.threshold"])
    )
    _mask = (
        Tensor(np.ones_like(_feats.value))
        if unit_mask
        else mask_head(_ro, _p["mask.kernel"], _p["mask.bias"])
    )

    _batch, _, _frames = _feats.shape
    _stats = SpikeStats(
        _batch,
        _frames,
        _cfg.separator.n_bottleneck,
        _cfg.separator.n_hidden,
        _cfg.use_scnn,
        _cfg.use_srnn,
        int(_bn.value.sum()),
        _scnn_spikes,
        _srnn_spikes,
        int(np.count_nonzero(_ro.value)),
    )
    return _mask, _bn, _ro, _stats, SeparatorState(_scnn_st, _srnn_st, _ro_u, _context)


def forward(
    _model: DpsnnModel,
    _wave: Tensor | ArrayFloat,
    /,
    *,
    tape: Tape | None = None,
    unit_mask: bool = False,
    state: SeparatorState | None = None,
) -> ForwardResult:
    """Enhance a batch of waveforms

    Parameters
    ----------
    _model
        The model.
    _wave
        Noisy waveforms, :code:`[batch, 1, T]` with :math:`T \\geqslant L`.
    tape
        If given, parameters are registered on the tape under their names and
        every operation is recorded for :func:`dpsnn.core.autodiff.backward`.
    unit_mask
        Force the mask to ones, bypassing the separator output.
    state
        Separator state to start from; zeros if omitted.

    Returns
    -------
        The enhanced waveforms with the intermediate maps and spike tallies.

    Raises
    ------
    DimensionError
        If the input is not a batch of mono waveforms of at least one frame.

    """
    _wave = ad.as_tensor(_wave)
    if _wave.ndim != 3:
        raise DimensionError(f"Expected waveforms of shape [batch, 1, T], got {_wave.shape}.")
    if _wave.dtype != _model.dtype:
        _wave = Tensor(_wave.value.astype(_model.dtype))
    _p = bind_params(_model, tape)
    _feats = features(_model, _p, _wave)
    if state is None:
        state = SeparatorState.zeros(
            _model.config, _wave.shape[0], dtype=_model.dtype.type
        )
    _mask, _bn, _ro, _stats, _state = separate(
        _model, _p, _feats, state, unit_mask=unit_mask
    )
    _enhanced = decode(
        _mask * _feats, _p["decoder.kernel"], stride=_model.config.encoder.stride
    )
    logger.debug(
        "forward: %d frames, spike density %.4f", _stats.frames, _stats.spike_density
    )
    return ForwardResult(_enhanced, _stats, _bn, _ro, _mask, _state)
