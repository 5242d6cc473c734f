"""
Causal 1D convolution, transposed convolution and per-step channel normalization.

Padding, where any, is explicit and on the left, so that output step :math:`t`
never reads input beyond step :math:`t`.

"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .. import VERSION, ArrayFloat, DimensionError  # noqa: TID252
from .autodiff import Tensor, _apply, unbroadcast

__version__ = VERSION

LAYERNORM_EPS = 1e-8


def conv_out_len(_t: int, _k: int, /, *, stride: int = 1, left_pad: int = 0) -> int:
    """Output length, :math:`\\lfloor (T + p - K) / s \\rfloor + 1`."""
    return (_t + left_pad - _k) // stride + 1


def conv1d(
    _x: Tensor,
    _kernel: Tensor,
    _bias: Tensor | None = None,
    /,
    *,
    stride: int = 1,
    groups: int = 1,
    left_pad: int = 0,
) -> Tensor:
    """Grouped, strided 1D convolution (cross-correlation) with left zero-padding.

    Parameters
    ----------
    _x
        Input, :code:`[B, Cin, T]`.
    _kernel
        Kernel, :code:`[Cout, Cin / groups, K]`.
    _bias
        Optional per-output-channel bias, :code:`[Cout]`.
    stride
        Step between successive output frames, in input steps.
    groups
        Number of channel groups; :code:`Cin` and :code:`Cout` must both be
        divisible by it.
    left_pad
        Zeros prepended along time.

    Returns
    -------
        Output, :code:`[B, Cout, T']` with
        :math:`T' = \\lfloor (T + p - K) / s \\rfloor + 1`.

    Raises
    ------
    DimensionError
        On any shape disagreement, or if the input is shorter than the kernel.

    """
    if _x.ndim != 3 or _kernel.ndim != 3:
        raise DimensionError(
            f"conv1d expects rank-3 input and kernel, got {_x.shape} and {_kernel.shape}."
        )
    _b, _cin, _t = _x.shape
    _cout, _cg, _k = _kernel.shape
    if stride < 1 or _k < 1 or groups < 1 or left_pad < 0:
        raise DimensionError(
            f"Invalid conv1d settings: stride={stride}, K={_k}, groups={groups}, "
            f"left_pad={left_pad}."
        )
    if _cin % groups or _cout % groups or _cg != _cin // groups:
        raise DimensionError(
            f"Kernel {_kernel.shape} does not fit {_cin} input channels in {groups} groups."
        )
    if _bias is not None and _bias.shape != (_cout,):
        raise DimensionError(f"Bias shape {_bias.shape} does not match {_cout} outputs.")
    if (_tout := conv_out_len(_t, _k, stride=stride, left_pad=left_pad)) < 1:
        raise DimensionError(f"Input of length {_t} is shorter than the kernel, {_k}.")

    _xp = np.pad(_x.value, ((0, 0), (0, 0), (left_pad, 0))) if left_pad else _x.value
    _win = sliding_window_view(_xp, _k, axis=2)[:, :, ::stride][:, :, :_tout]
    _win = _win.reshape(_b, groups, _cg, _tout, _k)
    _wg = _kernel.value.reshape(groups, _cout // groups, _cg, _k)
    _out = np.einsum("bgctk,gock->bgot", _win, _wg, optimize=True).reshape(
        _b, _cout, _tout
    )
    if _bias is not None:
        _out = _out + _bias.value[:, None]

    _tp = _xp.shape[-1]

    def _bwd(_g: ArrayFloat) -> tuple[ArrayFloat, ...]:
        _gg = _g.reshape(_b, groups, _cout // groups, _tout)
        _gw = np.einsum("bgot,bgctk->gock", _gg, _win, optimize=True)
        _gwin = np.einsum("bgot,gock->bgctk", _gg, _wg, optimize=True).reshape(
            _b, _cin, _tout, _k
        )
        _gxp = np.zeros((_b, _cin, _tp), dtype=_gwin.dtype)
        _span = stride * (_tout - 1) + 1
        for _i in range(_k):
            _gxp[:, :, _i : _i + _span : stride] += _gwin[..., _i]
        _grads: list[ArrayFloat] = [_gxp[:, :, left_pad:], _gw.reshape(_kernel.shape)]
        if _bias is not None:
            _grads.append(_g.sum(axis=(0, 2)))
        return _grads

    _parents = (_x, _kernel) if _bias is None else (_x, _kernel, _bias)
    return _apply(_out, _parents, _bwd)


def deconv1d(_x: Tensor, _kernel: Tensor, /, *, stride: int = 1) -> Tensor:
    """Transposed 1D convolution: overlap-add of kernel-weighted frames.

    Parameters
    ----------
    _x
        Input frames, :code:`[B, C, T]`.
    _kernel
        Kernel, :code:`[C, Cout, K]`; with the same array, this op is the
        adjoint of :func:`conv1d` with :code:`groups=1` and no padding.
    stride
        Frame hop, in output samples.

    Returns
    -------
        Output, :code:`[B, Cout, (T - 1) * stride + K]`.

    """
    if _x.ndim != 3 or _kernel.ndim != 3 or _x.shape[1] != _kernel.shape[0]:
        raise DimensionError(
            f"deconv1d kernel {_kernel.shape} does not fit input {_x.shape}."
        )
    if stride < 1:
        raise DimensionError(f"Stride must be positive, got {stride}.")
    _b, _c, _t = _x.shape
    _, _cout, _k = _kernel.shape
    _vx, _vw = _x.value, _kernel.value
    _frames = np.einsum("bct,cok->botk", _vx, _vw, optimize=True)
    _tout = (_t - 1) * stride + _k
    _out = np.zeros((_b, _cout, _tout), dtype=_frames.dtype)
    _span = stride * (_t - 1) + 1
    for _i in range(_k):
        _out[:, :, _i : _i + _span : stride] += _frames[..., _i]

    def _bwd(_g: ArrayFloat) -> tuple[ArrayFloat, ArrayFloat]:
        _gf = sliding_window_view(_g, _k, axis=2)[:, :, ::stride][:, :, :_t]
        return (
            np.einsum("botk,cok->bct", _gf, _vw, optimize=True),
            np.einsum("botk,bct->cok", _gf, _vx, optimize=True),
        )

    return _apply(_out, (_x, _kernel), _bwd)


def channel_layernorm(
    _x: Tensor, _gain: Tensor, _bias: Tensor, /, *, eps: float = LAYERNORM_EPS
) -> Tensor:
    """Normalize each (batch, time) column across channels, then scale and shift.

    Statistics never mix time steps, so the op is causal.
    """
    if _x.ndim != 3 or _gain.shape != (_x.shape[1],) or _bias.shape != _gain.shape:
        raise DimensionError(
            f"Layer-norm gain {_gain.shape} and bias {_bias.shape} "
            f"do not fit input {_x.shape}."
        )
    _c = _x.shape[1]
    _v = _x.value
    _xc = _v - _v.mean(axis=1, keepdims=True)
    _inv = 1 / np.sqrt((_xc * _xc).mean(axis=1, keepdims=True) + eps)
    _xhat = _xc * _inv
    _vg = _gain.value[:, None]
    _out = _vg * _xhat + _bias.value[:, None]

    def _bwd(_g: ArrayFloat) -> tuple[ArrayFloat, ArrayFloat, ArrayFloat]:
        _gxh = _g * _vg
        _gx = (_inv / _c) * (
            _c * _gxh
            - _gxh.sum(axis=1, keepdims=True)
            - _xhat * (_gxh * _xhat).sum(axis=1, keepdims=True)
        )
        return (
            _gx,
            unbroadcast(_g * _xhat, (_c, 1)).reshape(_c),
            unbroadcast(_g, (_c, 1)).reshape(_c),
        )

    return _apply(_out, (_x, _gain, _bias), _bwd)
