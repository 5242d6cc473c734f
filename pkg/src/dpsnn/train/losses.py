"""
Training objective: negative SI-SNR plus a small waveform MSE and L1 penalties
on the two suppressed activation maps.

"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import VERSION, ArrayFloat, DimensionError, NumericError  # noqa: TID252
from ..core import autodiff as ad  # noqa: TID252
from ..core.autodiff import Tensor  # noqa: TID252
from ..eval.metrics import SI_SNR_CAP_DB, SI_SNR_FLOOR_DB, SI_SNR_GUARD  # noqa: TID252
from . import LossConfig

__version__ = VERSION


@dataclass(slots=True, frozen=True)
class LossBreakdown:
    """Objective and its weighted components

    :code:`float(total.value)` equals the left-to-right sum of the components.
    """

    total: Tensor
    offset: float
    sisnr: float
    """Negative batch-mean SI-SNR, in dB"""
    mse: float
    l1_bn: float
    l1_ro: float


def si_snr_db(_est: Tensor, _ref: ArrayFloat, /) -> Tensor:
    """Differentiable SI-SNR per clip, capped at :data:`dpsnn.eval.metrics.SI_SNR_CAP_DB`

    Parameters
    ----------
    _est
        Estimates, :code:`[..., T]`.
    _ref
        References, same shape.

    Returns
    -------
        SI-SNR in dB, shape :code:`[...]`. Clips whose estimate has zero
        energy after mean removal score :data:`dpsnn.eval.metrics.SI_SNR_FLOOR_DB`
        and pass no gradient.

    Raises
    ------
    NumericError
        If a reference has zero energy after mean removal.

    """
    if _est.shape != _ref.shape:
        raise DimensionError(f"Estimate {_est.shape} and reference {_ref.shape} differ in shape.")
    _s = _ref - _ref.mean(axis=-1, keepdims=True)
    _s2 = np.sum(_s * _s, axis=-1, keepdims=True)
    if not (_s2 > 0).all():
        raise NumericError("SI-SNR reference has zero energy.")
    _e = ad.center(_est)
    _silent = (np.abs(_e.value).max(axis=-1) == 0).astype(_e.dtype)
    if _silent.any():
        # stand-in estimate keeps the silent rows finite; their value is replaced below
        _e = _e + _silent[..., None] * _s

    _target = ad.sum_(_e * _s, axis=-1, keepdims=True) / _s2 * _s
    _noise = _e - _target
    _t2 = ad.sum_(ad.square(_target), axis=-1)
    _n2 = ad.sum_(ad.square(_noise), axis=-1)
    _ratio = _t2 / (_n2 + SI_SNR_GUARD * _t2)
    _db = ad.minimum(ad.scale(ad.log(_ratio), 10 / np.log(10)), SI_SNR_CAP_DB)
    if _silent.any():
        _db = _db * (1 - _silent) + _silent * SI_SNR_FLOOR_DB
    return _db


def loss(
    _enhanced: Tensor,
    _clean: ArrayFloat,
    _suppressed_bn: Tensor,
    _suppressed_ro: Tensor,
    _cfg: LossConfig,
    /,
) -> LossBreakdown:
    """Training objective for a batch

    Parameters
    ----------
    _enhanced
        Model output, :code:`[batch, 1, T']`; zero-padded to the target length,
        which is at least :math:`T'`.
    _clean
        Targets, :code:`[batch, 1, T]`.
    _suppressed_bn, _suppressed_ro
        Suppressed activation maps, penalized by their mean absolute value.
    _cfg
        Loss weights.

    Raises
    ------
    DimensionError
        If the output is longer than the target.
    NumericError
        If a target has zero energy.

    """
    _t_out, _t = _enhanced.shape[-1], _clean.shape[-1]
    if _t_out > _t:
        raise DimensionError(f"Output length {_t_out} exceeds target length {_t}.")
    _est = ad.pad_time(_enhanced, _t - _t_out)

    _terms = (
        ad.neg(ad.mean(si_snr_db(_est, _clean))),
        ad.scale(ad.mean(ad.square(_est - _clean)), _cfg.w_mse),
        ad.scale(ad.mean(ad.abs_(_suppressed_bn)), _cfg.lambda2),
        ad.scale(ad.mean(ad.abs_(_suppressed_ro)), _cfg.lambda3),
    )
    _total = ad.as_tensor(np.float64(_cfg.offset))
    for _term in _terms:
        _total = _total + _term
    _sisnr, _mse, _l1_bn, _l1_ro = (float(_term.value) for _term in _terms)
    return LossBreakdown(_total, _cfg.offset, _sisnr, _mse, _l1_bn, _l1_ro)
