"""
Building blocks of the spiking separator and its encoder/decoder.

Feed-forward input currents of the SCNN, SRNN and readout are computed for a
whole sequence at once; only the neuron recurrences are stepped frame by frame.
All layers are strictly causal, so frame :math:`t` of any output depends only
on input frames :math:`\\leqslant t`.

"""

from __future__ import annotations

import numpy as np

from .. import VERSION, ConfigError, DimensionError, GateMode, SurrogateKind  # noqa: TID252
from ..core import autodiff as ad  # noqa: TID252
from ..core.autodiff import Tensor  # noqa: TID252
from ..core.conv_ops import conv1d, deconv1d  # noqa: TID252
from ..core.neurons import NeuronState, alif_step, fire, plif_step  # noqa: TID252
from . import SuppressionGate

__version__ = VERSION


def encode(_wave: Tensor, _kernel: Tensor, /, *, stride: int) -> Tensor:
    """Frame the waveform and map each frame to :math:`N` non-negative features.

    Parameters
    ----------
    _wave
        Waveform, :code:`[B, 1, T]`.
    _kernel
        Filterbank, :code:`[N, 1, L]`.
    stride
        Frame hop, in samples.

    Returns
    -------
        ReLU features, :code:`[B, N, T_frames]`, with
        :math:`T_{frames} = \\lfloor (T - L) / s \\rfloor + 1`.

    Raises
    ------
    DimensionError
        If the waveform is shorter than one frame.

    """
    if _wave.ndim != 3 or _wave.shape[1] != 1:
        raise DimensionError(f"Waveform must have shape [batch, 1, samples], got {_wave.shape}.")
    if _wave.shape[-1] < (_l := _kernel.shape[-1]):
        raise DimensionError(
            f"Waveform of {_wave.shape[-1]} samples is shorter than one frame, {_l}."
        )
    return ad.relu(conv1d(_wave, _kernel, stride=stride))


def decode(_masked: Tensor, _kernel: Tensor, /, *, stride: int) -> Tensor:
    """Overlap-add synthesis: :code:`[B, N, T_frames]` to :code:`[B, 1, (T_frames - 1) s + L]`."""
    return deconv1d(_masked, _kernel, stride=stride)


def suppress_binarize(_x: Tensor, _gate: SuppressionGate, /) -> Tensor:
    """Ones where :code:`_x` reaches the threshold, zeros elsewhere.

    Back-propagates the arctan surrogate at :code:`_x - threshold`, to the input
    and, negated, to the threshold.
    """
    if _gate.mode != GateMode.BINARIZE:
        raise ConfigError(f"Expected a {GateMode.BINARIZE} gate, got {_gate.mode}.")
    return fire(_x - _gate.threshold, SurrogateKind.ARCTAN)


def suppress_pass_above(_x: Tensor, _gate: SuppressionGate, /) -> Tensor:
    """Zeros below the threshold, :code:`_x` unchanged at or above it."""
    if _gate.mode != GateMode.PASS_ABOVE:
        raise ConfigError(f"Expected a {GateMode.PASS_ABOVE} gate, got {_gate.mode}.")
    return _x * fire(_x - _gate.threshold, SurrogateKind.ARCTAN)


def suppress(_x: Tensor, _gate: SuppressionGate, /) -> Tensor:
    match _gate.mode:
        case GateMode.BINARIZE:
            return suppress_binarize(_x, _gate)
        case GateMode.PASS_ABOVE:
            return suppress_pass_above(_x, _gate)


def scnn_forward(
    _x: Tensor,
    _kernel: Tensor,
    _bias: Tensor,
    _plif_a: Tensor,
    _state: NeuronState,
    _context: np.ndarray,
    /,
    *,
    theta: float = 1.0,
) -> tuple[Tensor, NeuronState, np.ndarray]:
    """Grouped causal temporal convolution driving PLIF neurons.

    Parameters
    ----------
    _x
        Binarized bottleneck frames, :code:`[batch, B, T]`.
    _kernel
        Kernel, :code:`[H, 1, K]`; bottleneck channel :math:`b` feeds outputs
        :math:`b H/B` to :math:`(b + 1) H/B - 1`.
    _bias
        Per-output-channel bias, :code:`[H]`.
    _plif_a
        Layer-shared PLIF parameter, :code:`[1]`.
    _state
        PLIF state, :code:`[batch, H]`.
    _context
        The :math:`K - 1` frames preceding :code:`_x`, zeros at stream start.
    theta
        PLIF firing threshold.

    Returns
    -------
        Spikes :code:`[batch, H, T]`, the PLIF state after the last frame, and
        the context for the frames that follow.

    Raises
    ------
    DimensionError
        If :math:`H` is not a multiple of the input channels, or the context
        does not fit the kernel.

    """
    _b, _bch, _t = _x.shape
    _h, _, _k = _kernel.shape
    if _h % _bch:
        raise DimensionError(f"SCNN channels, {_h}, are not a multiple of inputs, {_bch}.")
    if _context.shape != (_b, _bch, _k - 1):
        raise DimensionError(
            f"SCNN context of shape {_context.shape} does not fit input {_x.shape} "
            f"and kernel length {_k}."
        )
    _ctx_x = ad.concat_time(Tensor(_context.astype(_x.dtype, copy=False)), _x)
    _currents = conv1d(_ctx_x, _kernel, _bias, groups=_bch)

    _spikes = []
    for _ti in range(_t):
        _s, _state = plif_step(_state, ad.time_step(_currents, _ti), _plif_a, theta=theta)
        _spikes.append(_s)
    _next_context = _ctx_x.value[..., _ctx_x.shape[-1] - (_k - 1) :]
    return ad.stack_time(_spikes), _state, _next_context


def srnn_forward(
    _x: Tensor,
    _w_in: Tensor,
    _w_rec: Tensor,
    _tau_m: Tensor,
    _tau_adp: Tensor,
    _state: NeuronState,
    /,
    *,
    b0: float,
    beta: float,
) -> tuple[Tensor, NeuronState]:
    """Fully-connected recurrent ALIF layer.

    Per frame, :math:`I_t = W_{in} x_t + W_{rec} s_{t-1}`; returns spikes
    :code:`[batch, B, T]` and the state after the last frame.
    """
    _ff = ad.linear(_x, _w_in)
    _spikes = []
    for _ti in range(_x.shape[-1]):
        _i = ad.time_step(_ff, _ti) + ad.linear(_state.s_prev, _w_rec)
        _s, _state = alif_step(_state, _i, _tau_m, _tau_adp, b0=b0, beta=beta)
        _spikes.append(_s)
    return ad.stack_time(_spikes), _state


def readout_forward(
    _x: Tensor, _weight: Tensor, _tau: Tensor, _u: Tensor, /
) -> tuple[Tensor, Tensor]:
    """Non-spiking leaky integrator.

    :math:`u_t = (1 - 1/\\tau) u_{t-1} + (1/\\tau) W x_t`; the potential is the
    output, with no threshold and no reset.

    Returns
    -------
        Potentials :code:`[batch, B, T]` and the potential after the last frame.

    """
    _ff = ad.linear(_x, _weight)
    _k = 1 / _tau
    _keep = 1 - _k
    _out = []
    for _ti in range(_x.shape[-1]):
        _u = _keep * _u + _k * ad.time_step(_ff, _ti)
        _out.append(_u)
    return ad.stack_time(_out), _u


def mask_head(_x: Tensor, _kernel: Tensor, _bias: Tensor, /) -> Tensor:
    """Pointwise-in-time map to :math:`N` channels, squashed into (0, 1)."""
    return ad.sigmoid(conv1d(_x, _kernel, _bias))
