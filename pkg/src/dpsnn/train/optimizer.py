"""
Adaptive-moment parameter updates, gradient-norm clipping and a plateau
learning-rate schedule, over name-keyed parameter maps.

"""

from __future__ import annotations

import logging
from collections.abc import Mapping

import numpy as np
from attrs import define, field

from .. import VERSION, ArrayFloat, DimensionError  # noqa: TID252

__version__ = VERSION

logger = logging.getLogger(__name__)


@define
class AdamMoments:
    """First and second moment estimates, and the number of steps taken."""

    m: dict[str, ArrayFloat]
    v: dict[str, ArrayFloat]
    step: int = 0

    @classmethod
    def zeros(cls, _params: Mapping[str, ArrayFloat], /) -> AdamMoments:
        return cls(
            {_k: np.zeros_like(_v) for _k, _v in _params.items()},
            {_k: np.zeros_like(_v) for _k, _v in _params.items()},
        )


def adam_step(
    _params: Mapping[str, ArrayFloat],
    _grads: Mapping[str, ArrayFloat],
    _moments: AdamMoments,
    /,
    *,
    lr: float,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
) -> dict[str, ArrayFloat]:
    """One bias-corrected adaptive-moment update

    Moments are updated in place; the parameters are returned as a new map.

    Raises
    ------
    DimensionError
        If a gradient is missing or differs in shape from its parameter.

    """
    _b1, _b2 = betas
    _moments.step += 1
    _c1 = 1 - _b1**_moments.step
    _c2 = 1 - _b2**_moments.step

    _out: dict[str, ArrayFloat] = {}
    for _k, _p in _params.items():
        if _k not in _grads or _grads[_k].shape != _p.shape:
            raise DimensionError(f"No gradient of matching shape for parameter {_k!r}.")
        _g = _grads[_k]
        _m = _moments.m[_k] = _b1 * _moments.m[_k] + (1 - _b1) * _g
        _v = _moments.v[_k] = _b2 * _moments.v[_k] + (1 - _b2) * _g * _g
        _out[_k] = _p - lr * (_m / _c1) / (np.sqrt(_v / _c2) + eps)
    return _out


def global_norm(_grads: Mapping[str, ArrayFloat], /) -> float:
    return float(np.sqrt(sum(np.vdot(_g, _g) for _g in _grads.values())))


def clip_grad_norm(
    _grads: Mapping[str, ArrayFloat], _max_norm: float, /
) -> tuple[dict[str, ArrayFloat], float]:
    """Scale gradients down so their global norm is at most :code:`_max_norm`.

    A non-positive ceiling disables clipping. Returns the gradients and their
    norm before clipping.
    """
    _norm = global_norm(_grads)
    if _max_norm <= 0 or _norm <= _max_norm:
        return dict(_grads), _norm
    _scale = _max_norm / _norm
    return {_k: _g * _scale for _k, _g in _grads.items()}, _norm


@define
class PlateauSchedule:
    """Multiply the learning rate by :code:`factor` after :code:`patience`
    epochs without improvement of a higher-is-better metric."""

    lr: float
    factor: float = 0.5
    patience: int = 2
    best: float = field(default=-np.inf)
    stale: int = 0

    def step(self, _metric: float, /) -> float:
        if _metric > self.best:
            self.best, self.stale = _metric, 0
        else:
            self.stale += 1
            if self.stale > self.patience:
                self.lr *= self.factor
                self.stale = 0
                logger.info("Validation plateau; learning rate reduced to %.3g", self.lr)
        return self.lr
