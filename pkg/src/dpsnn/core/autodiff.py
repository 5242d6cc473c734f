"""
Dense-array tensors with a reverse-mode gradient tape.

A :class:`Tensor` wraps a numpy array. Tensors created with a tape attached
are recorded on that :class:`Tape` as they are combined by the operations of
this module; tensors without a tape are plain values, and operations on them
are evaluated without recording, so the same code serves both training (BPTT)
and inference. Every operation raises :class:`dpsnn.NumericError` if its result
holds NaN or Inf.

Arrays are laid out batch-first and channel-first, with time as the last axis,
as in :code:`[batch, channels, time]`.

"""

from __future__ import annotations

from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass
from typing import Any, TypeAlias

import numpy as np

from .. import (  # noqa: TID252
    VERSION,
    ArrayDouble,
    ArrayFloat,
    DimensionError,
    NumericError,
    TapeError,
)

__version__ = VERSION


@dataclass(slots=True, frozen=True)
class IndexedGrad:
    """Gradient contribution confined to a sub-array of the parent

    Lets per-time-step slices accumulate into a sequence gradient without
    materializing a full-size array per step.
    """

    index: tuple[Any, ...]
    value: ArrayFloat


_Grad: TypeAlias = "ArrayFloat | IndexedGrad | None"
BackwardFn: TypeAlias = Callable[[ArrayFloat], Sequence[_Grad]]


class Tensor:
    """A numpy array, optionally recorded on a :class:`Tape`.

    Parameters
    ----------
    _value
        Array data; converted with :func:`numpy.asarray`.
    tape
        Tape on which the tensor was recorded, if any.
    node
        Position of the recording on the tape.
    """

    __slots__ = ("node", "tape", "value")

    def __init__(
        self, _value: ArrayFloat | float, /, *, tape: Tape | None = None, node: int = -1
    ) -> None:
        self.value: ArrayFloat = np.asarray(_value)
        self.tape = tape
        self.node = node

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def dtype(self) -> np.dtype[Any]:
        return self.value.dtype

    @property
    def ndim(self) -> int:
        return self.value.ndim

    def __repr__(self) -> str:
        _rec = f"node={self.node}" if self.tape is not None else "untaped"
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, {_rec})"

    def __add__(self, _other: Tensor | ArrayFloat | float, /) -> Tensor:
        return add(self, _other)

    def __radd__(self, _other: ArrayFloat | float, /) -> Tensor:
        return add(_other, self)

    def __sub__(self, _other: Tensor | ArrayFloat | float, /) -> Tensor:
        return sub(self, _other)

    def __rsub__(self, _other: ArrayFloat | float, /) -> Tensor:
        return sub(_other, self)

    def __mul__(self, _other: Tensor | ArrayFloat | float, /) -> Tensor:
        return mul(self, _other)

    def __rmul__(self, _other: ArrayFloat | float, /) -> Tensor:
        return mul(_other, self)

    def __truediv__(self, _other: Tensor | ArrayFloat | float, /) -> Tensor:
        return div(self, _other)

    def __rtruediv__(self, _other: ArrayFloat | float, /) -> Tensor:
        return div(_other, self)

    def __neg__(self) -> Tensor:
        return neg(self)


@dataclass(slots=True, frozen=True)
class _Node:
    parents: tuple[Tensor, ...]
    backward: BackwardFn | None
    name: str | None = None


class Tape:
    """Ordered record of forward operations for reverse-mode differentiation.

    Parameters
    ----------
    surrogate
        If True (default), spike operations back-propagate their surrogate
        derivative. If False, they back-propagate the almost-everywhere exact
        derivative of the step function, zero, which makes central-difference
        checks of the remaining continuous paths meaningful.

    """

    def __init__(self, *, surrogate: bool = True) -> None:
        self.surrogate = surrogate
        self._nodes: list[_Node] = []
        self._params: dict[str, Tensor] = {}
        self._consumed = False

    def __len__(self) -> int:
        return len(self._nodes)

    @property
    def parameters(self) -> Mapping[str, Tensor]:
        return self._params

    def parameter(self, _name: str, _value: ArrayFloat, /) -> Tensor:
        """Register a named leaf whose gradient :func:`backward` reports."""
        if _name in self._params:
            raise TapeError(f"Parameter {_name!r} is already registered on this tape.")
        _t = self._append(np.asarray(_value), _Node((), None, _name))
        self._params[_name] = _t
        return _t

    def record(
        self, _value: ArrayFloat, _parents: tuple[Tensor, ...], _backward: BackwardFn, /
    ) -> Tensor:
        if self._consumed:
            raise TapeError("Cannot record on a tape that was already replayed.")
        return self._append(_value, _Node(_parents, _backward))

    def reset(self) -> None:
        """Forget all recordings, including registered parameters."""
        self._nodes.clear()
        self._params.clear()
        self._consumed = False

    def _append(self, _value: ArrayFloat, _node: _Node, /) -> Tensor:
        self._nodes.append(_node)
        return Tensor(_value, tape=self, node=len(self._nodes) - 1)


def backward(
    _tape: Tape, _loss: Tensor, /, *, loss_grad: float = 1.0
) -> dict[str, ArrayFloat]:
    """Replay the tape in reverse to obtain gradients of a scalar loss.

    Parameters
    ----------
    _tape
        Tape on which the forward pass was recorded.
    _loss
        Scalar tensor recorded on the tape.
    loss_grad
        Seed gradient for the loss.

    Returns
    -------
        Map of parameter name to gradient, in registration order; parameters
        the loss does not depend on get zero gradients.

    Raises
    ------
    TapeError
        If the tape was already replayed, or the loss is not recorded on it.
    DimensionError
        If the loss is not a scalar.

    """
    if _tape._consumed:
        raise TapeError("Tape was already replayed; call reset() before reuse.")
    if _loss.tape is not _tape:
        raise TapeError("Loss tensor is not recorded on this tape.")
    if _loss.value.size != 1:
        raise DimensionError(f"Loss must be a scalar, got shape {_loss.shape}.")
    _tape._consumed = True

    _nodes = _tape._nodes
    _grads: list[ArrayFloat | None] = [None] * len(_nodes)
    _owned = [False] * len(_nodes)
    _grads[_loss.node] = np.full_like(_loss.value, loss_grad)

    for _i in range(_loss.node, -1, -1):
        _g = _grads[_i]
        _node = _nodes[_i]
        if _g is None or _node.backward is None:
            continue
        for _p, _pg in zip(_node.parents, _node.backward(_g), strict=True):
            if _pg is None or _p.tape is not _tape:
                continue
            _j = _p.node
            if isinstance(_pg, IndexedGrad):
                if _grads[_j] is None:
                    _grads[_j] = np.zeros_like(_p.value)
                elif not _owned[_j]:
                    _grads[_j] = np.array(_grads[_j])
                _owned[_j] = True
                _grads[_j][_pg.index] += _pg.value  # type: ignore[index]
            elif _grads[_j] is None:
                _grads[_j] = _pg
            else:
                _grads[_j] = _grads[_j] + _pg  # type: ignore[operator]
                _owned[_j] = True
        # intermediate gradients are not needed once propagated
        _grads[_i] = None if _nodes[_i].name is None else _grads[_i]

    return {
        _n: (
            np.zeros_like(_t.value)
            if (_gp := _grads[_t.node]) is None
            else np.array(_gp).reshape(_t.shape)
        )
        for _n, _t in _tape._params.items()
    }


def as_tensor(_x: Tensor | ArrayFloat | float, /) -> Tensor:
    return _x if isinstance(_x, Tensor) else Tensor(_x)


def detach(_x: Tensor, /) -> Tensor:
    """Same value, no gradient path."""
    return Tensor(_x.value)


def _tape_of(*_ts: Tensor) -> Tape | None:
    _tape = None
    for _t in _ts:
        if _t.tape is None:
            continue
        if _tape is None:
            _tape = _t.tape
        elif _t.tape is not _tape:
            raise TapeError("Operands are recorded on different tapes.")
    return _tape


def _apply(
    _value: ArrayFloat, _parents: tuple[Tensor, ...], _backward: BackwardFn, /
) -> Tensor:
    if not np.isfinite(_value).all():
        raise NumericError(
            f"Non-finite values in the output of an op, shape {_value.shape}."
        )
    _tape = _tape_of(*_parents)
    return Tensor(_value) if _tape is None else _tape.record(_value, _parents, _backward)


def unbroadcast(_g: ArrayFloat, _shape: tuple[int, ...], /) -> ArrayFloat:
    """Sum a broadcast gradient back down to the operand's shape."""
    if _g.shape == _shape:
        return _g
    _g = _g.sum(axis=tuple(range(_g.ndim - len(_shape)))) if _g.ndim > len(_shape) else _g
    _axes = tuple(_i for _i, _n in enumerate(_shape) if _n == 1 and _g.shape[_i] != 1)
    return _g.sum(axis=_axes, keepdims=True) if _axes else _g


def _check_broadcast(_a: Tensor, _b: Tensor, _op: str, /) -> None:
    try:
        np.broadcast_shapes(_a.shape, _b.shape)
    except ValueError:
        raise DimensionError(
            f"Operand shapes {_a.shape} and {_b.shape} do not agree for {_op}."
        ) from None


def add(_a: Tensor | ArrayFloat | float, _b: Tensor | ArrayFloat | float, /) -> Tensor:
    _a, _b = as_tensor(_a), as_tensor(_b)
    _check_broadcast(_a, _b, "add")
    _sa, _sb = _a.shape, _b.shape
    return _apply(
        _a.value + _b.value,
        (_a, _b),
        lambda _g: (unbroadcast(_g, _sa), unbroadcast(_g, _sb)),
    )


def sub(_a: Tensor | ArrayFloat | float, _b: Tensor | ArrayFloat | float, /) -> Tensor:
    _a, _b = as_tensor(_a), as_tensor(_b)
    _check_broadcast(_a, _b, "sub")
    _sa, _sb = _a.shape, _b.shape
    return _apply(
        _a.value - _b.value,
        (_a, _b),
        lambda _g: (unbroadcast(_g, _sa), unbroadcast(-_g, _sb)),
    )


def mul(_a: Tensor | ArrayFloat | float, _b: Tensor | ArrayFloat | float, /) -> Tensor:
    _a, _b = as_tensor(_a), as_tensor(_b)
    _check_broadcast(_a, _b, "mul")
    _va, _vb = _a.value, _b.value
    return _apply(
        _va * _vb,
        (_a, _b),
        lambda _g: (unbroadcast(_g * _vb, _va.shape), unbroadcast(_g * _va, _vb.shape)),
    )


def div(_a: Tensor | ArrayFloat | float, _b: Tensor | ArrayFloat | float, /) -> Tensor:
    _a, _b = as_tensor(_a), as_tensor(_b)
    _check_broadcast(_a, _b, "div")
    _va, _vb = _a.value, _b.value
    _out = _va / _vb
    return _apply(
        _out,
        (_a, _b),
        lambda _g: (
            unbroadcast(_g / _vb, _va.shape),
            unbroadcast(-_g * _out / _vb, _vb.shape),
        ),
    )


def neg(_x: Tensor, /) -> Tensor:
    return _apply(-_x.value, (_x,), lambda _g: (-_g,))


def scale(_x: Tensor, _c: float, /) -> Tensor:
    """Multiply by a constant scalar."""
    return _apply(_x.value * _c, (_x,), lambda _g: (_g * _c,))


def relu(_x: Tensor, /) -> Tensor:
    _pos = _x.value > 0
    return _apply(np.where(_pos, _x.value, 0), (_x,), lambda _g: (_g * _pos,))


def sigmoid(_x: Tensor, /) -> Tensor:
    # split by sign so that exp never overflows
    _v = _x.value
    _e = np.exp(-np.abs(_v))
    _out = np.where(_v >= 0, 1 / (1 + _e), _e / (1 + _e))
    return _apply(_out, (_x,), lambda _g: (_g * _out * (1 - _out),))


def exp(_x: Tensor, /) -> Tensor:
    _out = np.exp(_x.value)
    return _apply(_out, (_x,), lambda _g: (_g * _out,))


def log(_x: Tensor, /) -> Tensor:
    _v = _x.value
    return _apply(np.log(_v), (_x,), lambda _g: (_g / _v,))


def abs_(_x: Tensor, /) -> Tensor:
    _v = _x.value
    return _apply(np.abs(_v), (_x,), lambda _g: (_g * np.sign(_v),))


def square(_x: Tensor, /) -> Tensor:
    _v = _x.value
    return _apply(_v * _v, (_x,), lambda _g: (2 * _g * _v,))


def minimum(_x: Tensor, _cap: float, /) -> Tensor:
    """Elementwise minimum with a constant; no gradient where the cap binds."""
    _below = _x.value < _cap
    return _apply(np.minimum(_x.value, _cap), (_x,), lambda _g: (_g * _below,))


def heaviside(
    _x: Tensor, _surrogate: Callable[[ArrayFloat], ArrayFloat], /
) -> Tensor:
    """Step function :math:`\\Theta(x)`, 1 where :math:`x \\geqslant 0`, else 0.

    Back-propagates :code:`_surrogate(x)` in place of the Dirac delta, unless
    the tape was created with :code:`surrogate=False`.
    """
    _v = _x.value
    _tape = _tape_of(_x)
    _out = (_v >= 0).astype(_v.dtype)
    if _tape is None:
        return Tensor(_out)

    def _bwd(_g: ArrayFloat) -> tuple[ArrayFloat]:
        return (_g * _surrogate(_v) if _tape.surrogate else np.zeros_like(_g),)

    return _tape.record(_out, (_x,), _bwd)


def sum_(_x: Tensor, /, *, axis: int | None = None, keepdims: bool = False) -> Tensor:
    """Sum over all axes, or over one axis."""
    _shape = _x.shape

    def _bwd(_g: ArrayFloat) -> tuple[ArrayFloat]:
        if axis is not None and not keepdims:
            _g = np.expand_dims(_g, axis)
        return (np.broadcast_to(_g, _shape),)

    return _apply(np.sum(_x.value, axis=axis, keepdims=keepdims), (_x,), _bwd)


def mean(_x: Tensor, /, *, axis: int | None = None, keepdims: bool = False) -> Tensor:
    _n = _x.value.size if axis is None else _x.shape[axis]
    return scale(sum_(_x, axis=axis, keepdims=keepdims), 1 / _n)


def center(_x: Tensor, /) -> Tensor:
    """Subtract the mean along the time (last) axis."""
    _mu = _x.value.mean(axis=-1, keepdims=True)
    return _apply(
        _x.value - _mu, (_x,), lambda _g: (_g - _g.mean(axis=-1, keepdims=True),)
    )


def time_step(_x: Tensor, _t: int, /) -> Tensor:
    """Select time step :code:`_t`, dropping the time axis."""
    _idx = (..., _t)
    _tape = _tape_of(_x)
    if _tape is None:
        return Tensor(_x.value[_idx])
    return _tape.record(_x.value[_idx], (_x,), lambda _g: (IndexedGrad(_idx, _g),))


def time_slice(_x: Tensor, _start: int, _stop: int, /) -> Tensor:
    _idx = (..., slice(_start, _stop))
    _tape = _tape_of(_x)
    if _tape is None:
        return Tensor(_x.value[_idx])
    return _tape.record(_x.value[_idx], (_x,), lambda _g: (IndexedGrad(_idx, _g),))


def stack_time(_xs: Sequence[Tensor], /) -> Tensor:
    """Stack per-step tensors along a new trailing time axis."""
    if not _xs:
        raise DimensionError("Cannot stack an empty sequence of time steps.")
    return _apply(
        np.stack([_t.value for _t in _xs], axis=-1),
        tuple(_xs),
        lambda _g: [_g[..., _i] for _i in range(len(_xs))],
    )


def concat_time(_a: Tensor, _b: Tensor, /) -> Tensor:
    """Join two sequences along the time (last) axis."""
    if _a.shape[:-1] != _b.shape[:-1]:
        raise DimensionError(
            f"Cannot join sequences of shape {_a.shape} and {_b.shape} in time."
        )
    _na = _a.shape[-1]
    return _apply(
        np.concatenate([_a.value, _b.value], axis=-1),
        (_a, _b),
        lambda _g: (_g[..., :_na], _g[..., _na:]),
    )


def pad_time(_x: Tensor, _n: int, /) -> Tensor:
    """Append :code:`_n` zeros along the time axis."""
    if _n < 0:
        raise DimensionError(f"Padding length must be non-negative, got {_n}.")
    _t = _x.shape[-1]
    _pads = [(0, 0)] * (_x.ndim - 1) + [(0, _n)]
    return _apply(np.pad(_x.value, _pads), (_x,), lambda _g: (_g[..., :_t],))


def linear(_x: Tensor, _w: Tensor, /) -> Tensor:
    """Dense map :math:`W x` over the channel axis.

    Parameters
    ----------
    _x
        Input of shape :code:`[batch, in]` (one time step) or
        :code:`[batch, in, time]`.
    _w
        Weights of shape :code:`[out, in]`.

    Returns
    -------
        Output of shape :code:`[batch, out]` or :code:`[batch, out, time]`.

    """
    if _w.ndim != 2 or _x.ndim not in {2, 3} or _x.shape[1] != _w.shape[1]:
        raise DimensionError(
            f"Weights of shape {_w.shape} cannot map input of shape {_x.shape}."
        )
    _vx, _vw = _x.value, _w.value
    if _x.ndim == 2:
        return _apply(_vx @ _vw.T, (_x, _w), lambda _g: (_g @ _vw, _g.T @ _vx))
    return _apply(
        np.einsum("oi,bit->bot", _vw, _vx, optimize=True),
        (_x, _w),
        lambda _g: (
            np.einsum("oi,bot->bit", _vw, _g, optimize=True),
            np.einsum("bot,bit->oi", _g, _vx, optimize=True),
        ),
    )


@dataclass(slots=True, frozen=True)
class GradCheckResult:
    """Analytic and central-difference gradients, per parameter."""

    analytic: dict[str, ArrayDouble]
    numeric: dict[str, ArrayDouble]
    rel_error: dict[str, float]
    """Max-norm error, :math:`\\|a - n\\|_\\infty / (\\|n\\|_\\infty + 10^{-8})`"""

    @property
    def max_rel_error(self) -> float:
        return max(self.rel_error.values(), default=0.0)


def gradcheck(
    _fn: Callable[[Mapping[str, Tensor]], Tensor],
    _params: Mapping[str, ArrayDouble],
    /,
    *,
    eps: float = 1e-6,
    surrogate: bool = False,
    max_elements: int | None = None,
) -> GradCheckResult:
    """Compare taped gradients of a scalar function with central differences.

    Parameters
    ----------
    _fn
        Maps named parameter tensors to a scalar tensor.
    _params
        Values at which gradients are checked; 64-bit arrays recommended.
    eps
        Perturbation size for central differences.
    surrogate
        Passed to :class:`Tape`.
    max_elements
        If given, check only the first :code:`max_elements` entries (in
        row-major order) of each parameter; other numeric entries are NaN.

    Returns
    -------
        Gradients and max-norm relative errors per parameter.

    """
    _tape = Tape(surrogate=surrogate)
    _loss = _fn({_n: _tape.parameter(_n, _v) for _n, _v in _params.items()})
    _analytic = backward(_tape, _loss)

    def _eval(_vals: Mapping[str, ArrayDouble]) -> float:
        return float(_fn({_n: Tensor(_v) for _n, _v in _vals.items()}).value)

    _numeric: dict[str, ArrayDouble] = {}
    _rel: dict[str, float] = {}
    for _n, _v in _params.items():
        _num = np.full(_v.shape, np.nan, dtype=np.float64)
        _work = dict(_params)
        _count = _v.size if max_elements is None else min(_v.size, max_elements)
        for _k in range(_count):
            _idx = np.unravel_index(_k, _v.shape)
            _hi, _lo = np.array(_v, dtype=np.float64), np.array(_v, dtype=np.float64)
            _hi[_idx] += eps
            _lo[_idx] -= eps
            _work[_n] = _hi
            _f_hi = _eval(_work)
            _work[_n] = _lo
            _f_lo = _eval(_work)
            _num[_idx] = (_f_hi - _f_lo) / (2 * eps)
        _numeric[_n] = _num
        _mask = ~np.isnan(_num)
        _a = np.asarray(_analytic[_n], dtype=np.float64)[_mask]
        _rel[_n] = float(
            np.max(np.abs(_a - _num[_mask]), initial=0.0)
            / (np.max(np.abs(_num[_mask]), initial=0.0) + 1e-8)
        )

    return GradCheckResult(_analytic, _numeric, _rel)
