"""
Full-sequence BPTT training on synthetic mixtures.

"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import VERSION, ArrayFloat, NumericError  # noqa: TID252
from ..core.autodiff import Tape, backward  # noqa: TID252
from ..eval import metrics  # noqa: TID252
from ..model import SpikeStats  # noqa: TID252
from ..model.network import DpsnnModel, forward, project_params  # noqa: TID252
from . import EpochRecord, LossConfig, SynthBatch, SynthSpec, TrainConfig
from .data_generation import synth_batch
from .losses import loss
from .optimizer import AdamMoments, PlateauSchedule, adam_step, clip_grad_norm

__version__ = VERSION

logger = logging.getLogger(__name__)

TRAIN_STREAM = 0
VALIDATION_STREAM = 1


@dataclass(slots=True, frozen=True)
class TrainResult:
    model: DpsnnModel
    """Model after the epoch with the highest validation SI-SNR"""
    history: list[EpochRecord]
    best_epoch: int | None = None
    """None when no epoch ran, and the starting model is returned"""


@dataclass(slots=True, frozen=True)
class ValidationResult:
    si_snr: float
    si_snri: float
    stats: SpikeStats


def to_float32_grid(_params: dict[str, ArrayFloat], /) -> dict[str, ArrayFloat]:
    """Round parameters to float32 values, keeping their dtype."""
    return {_k: _v.astype(np.float32).astype(_v.dtype) for _k, _v in _params.items()}


def fit_length(_x: ArrayFloat, _n: int, /) -> ArrayFloat:
    """Zero-pad or trim the last axis to length :code:`_n`."""
    if _x.shape[-1] >= _n:
        return _x[..., :_n]
    return np.pad(_x, [(0, 0)] * (_x.ndim - 1) + [(0, _n - _x.shape[-1])])


def validate(_model: DpsnnModel, _batch: SynthBatch, /) -> ValidationResult:
    """Batch-mean SI-SNR and SI-SNR improvement of the enhanced mixtures."""
    _res = forward(_model, _batch.noisy)
    _enh = fit_length(_res.enhanced.value, _batch.clean.shape[-1])
    _si = [metrics.si_snr(_e, _c).value_db for _e, _c in zip(_enh, _batch.clean, strict=True)]
    _sii = [
        _v - metrics.si_snr(_n, _c).value_db
        for _v, _n, _c in zip(_si, _batch.noisy, _batch.clean, strict=True)
    ]
    return ValidationResult(float(np.mean(_si)), float(np.mean(_sii)), _res.stats)


def train(
    _model: DpsnnModel,
    _spec: SynthSpec,
    _loss_cfg: LossConfig,
    _cfg: TrainConfig,
    /,
    *,
    seed: int = 0,
    history_path: Path | None = None,
    n_jobs: int = 1,
) -> TrainResult:
    """Train a model on freshly synthesized batches

    Each epoch runs :attr:`TrainConfig.batches_per_epoch` updates, then scores
    a validation set drawn once, from a stream separate from the training
    batches. Parameters stay on the float32 grid, so checkpoints reproduce
    the trained model exactly.

    Parameters
    ----------
    _model
        Starting model.
    _spec
        Mixture specification.
    _loss_cfg
        Loss weights.
    _cfg
        Optimization schedule.
    seed
        Seed for all synthesized data.
    history_path
        If given, one JSON record per epoch is written here, replacing any
        earlier content.
    n_jobs
        Worker threads for data synthesis.

    Returns
    -------
        The model after the epoch with the best validation SI-SNR, that
        epoch, and the per-epoch history.

    Raises
    ------
    NumericError
        If the loss or a gradient is not finite.

    """
    _val = synth_batch(_spec, seed, _cfg.val_clips, stream=(VALIDATION_STREAM,), n_jobs=n_jobs)
    _moments = AdamMoments.zeros(_model.params)
    _schedule = PlateauSchedule(_cfg.lr, _cfg.lr_factor, _cfg.plateau_patience)
    _history: list[EpochRecord] = []
    _best_model, _best_si = _model, -np.inf
    _best_epoch: int | None = None
    if history_path is not None:
        history_path.write_text("", encoding="utf-8")

    for _epoch in range(_cfg.epochs):
        _lr = _schedule.lr
        _sums = np.zeros(6)
        for _bi in range(_cfg.batches_per_epoch):
            _batch = synth_batch(
                _spec,
                seed,
                _cfg.batch_size,
                stream=(TRAIN_STREAM, _epoch, _bi),
                n_jobs=n_jobs,
            )
            _tape = Tape()
            _res = forward(_model, _batch.noisy, tape=_tape)
            _lb = loss(
                _res.enhanced, _batch.clean, _res.suppressed_bn, _res.suppressed_ro, _loss_cfg
            )
            _parts = (_lb.offset, _lb.sisnr, _lb.mse, _lb.l1_bn, _lb.l1_ro)
            if not np.isfinite(_lb.total.value) or not np.isfinite(_parts).all():
                raise NumericError(
                    f"Non-finite loss at epoch {_epoch}, batch {_bi}: "
                    f"total {_lb.total.value}, components {_parts}."
                )
            _grads = backward(_tape, _lb.total)
            if _bad := sorted(_k for _k, _g in _grads.items() if not np.isfinite(_g).all()):
                raise NumericError(
                    f"Non-finite gradients at epoch {_epoch}, batch {_bi}: {', '.join(_bad)}."
                )
            _grads, _norm = clip_grad_norm(_grads, _cfg.grad_clip)
            _params = adam_step(
                _model.params, _grads, _moments, lr=_lr, betas=_cfg.betas, eps=_cfg.eps
            )
            _model = _model.replace_params(to_float32_grid(project_params(_params)))
            _sums += (float(_lb.total.value), *_parts)
            logger.debug(
                "epoch %d batch %d: loss %.4f, grad norm %.3g",
                _epoch,
                _bi,
                float(_lb.total.value),
                _norm,
            )

        _means = _sums / _cfg.batches_per_epoch
        _v = validate(_model, _val)
        _record = EpochRecord(
            _epoch,
            _lr,
            *(float(_m) for _m in _means),
            _v.si_snr,
            _v.si_snri,
            _v.stats.spike_density,
            _v.stats.bottleneck_density,
        )
        _history.append(_record)
        _schedule.step(_v.si_snr)
        if _v.si_snr > _best_si:
            _best_model, _best_epoch, _best_si = _model, _epoch, _v.si_snr
        logger.info(
            "epoch %d: loss %.4f, val SI-SNR %.2f dB, SI-SNRi %.2f dB, spike density %.4f",
            _epoch,
            _record.train_loss,
            _record.val_si_snr,
            _record.val_si_snri,
            _record.spike_density,
        )
        if history_path is not None:
            with history_path.open("a", encoding="utf-8") as _fh:
                _fh.write(_record.to_json() + "\n")

    if _best_epoch is not None:
        logger.info("best epoch %d: val SI-SNR %.2f dB", _best_epoch, _best_si)
    return TrainResult(_best_model, _history, _best_epoch)
