"""
Specifications (classes with attributes defining loss weights, synthetic data
and optimization settings) and containers for training.

"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Any

import numpy as np
from attrs import Attribute, field, frozen, validators

from .. import SAMPLE_RATE, VERSION, ArrayDouble, ConfigError, NoiseKind  # noqa: TID252

__version__ = VERSION


def _non_negative(_i: Any, _a: Attribute[float], _v: float) -> None:
    if not (np.isfinite(_v) and _v >= 0):
        raise ConfigError(f"{_a.name} must be a finite, non-negative number, got {_v}.")


def _positive_int(_i: Any, _a: Attribute[int], _v: int) -> None:
    if isinstance(_v, bool) or not isinstance(_v, int) or _v < 1:
        raise ConfigError(f"{_a.name} must be a positive integer, got {_v!r}.")


@frozen
class LossConfig:
    """Weights of the training objective

    .. math::

        \\mathcal{L} = c + \\mathcal{L}_{si\\text{-}snr}
            + w \\mathcal{L}_{mse}
            + \\lambda_2 \\lVert g_{bn} \\rVert_1
            + \\lambda_3 \\lVert g_{ro} \\rVert_1

    where :math:`g_{bn}` and :math:`g_{ro}` are the suppressed bottleneck and
    readout activations.
    """

    offset: float = field(default=100.0, converter=float)
    """Constant :math:`c`; it shifts the loss, not its gradients"""

    w_mse: float = field(default=0.001, converter=float, validator=_non_negative)
    lambda2: float = field(default=0.001, converter=float, validator=_non_negative)
    """Weight of the L1 penalty on the binarized bottleneck"""

    lambda3: float = field(default=0.001, converter=float, validator=_non_negative)
    """Weight of the L1 penalty on the suppressed readout"""


@frozen
class SynthSpec:
    """Synthetic noisy-speech mixtures

    Clean signals are harmonic tone stacks with a gliding fundamental, an
    amplitude-modulated envelope and random onset and offset. Noise is drawn
    from one of the :class:`dpsnn.NoiseKind` families and scaled so the mixture
    has the drawn SNR exactly.
    """

    clip_seconds: float = field(default=1.0, converter=float)

    @clip_seconds.validator
    def _check_clip_seconds(_i: SynthSpec, _a: Attribute[float], _v: float) -> None:
        if not 0 < _v <= 60:
            raise ConfigError(f"Clip length must lie in (0, 60] seconds, got {_v}.")

    sample_rate: int = field(default=SAMPLE_RATE, validator=_positive_int)

    snr_db: tuple[float, ...] = field(
        default=(0.0, 5.0, 10.0, 15.0),
        converter=lambda _v: tuple(float(_s) for _s in _v),
    )
    """SNRs drawn from, uniformly"""

    @snr_db.validator
    def _check_snr_db(_i: SynthSpec, _a: Attribute[tuple[float, ...]], _v: tuple[float, ...]) -> None:
        if not _v or not np.isfinite(_v).all():
            raise ConfigError(f"SNR set must be a non-empty set of finite values, got {_v}.")

    noise_kinds: tuple[NoiseKind, ...] = field(
        default=tuple(NoiseKind), converter=lambda _v: tuple(NoiseKind(_k) for _k in _v)
    )

    @noise_kinds.validator
    def _check_noise_kinds(
        _i: SynthSpec, _a: Attribute[tuple[NoiseKind, ...]], _v: tuple[NoiseKind, ...]
    ) -> None:
        if not _v:
            raise ConfigError("At least one noise kind is required.")

    f0_range: tuple[float, float] = field(default=(100.0, 300.0))
    """Range of the fundamental, in Hz"""

    @f0_range.validator
    def _check_f0_range(_i: SynthSpec, _a: Attribute[tuple[float, float]], _v: tuple[float, float]) -> None:
        if not 0 < _v[0] <= _v[1] < _i.sample_rate / 2:
            raise ConfigError(f"Invalid fundamental-frequency range, {_v}.")

    n_harmonics: int = field(default=10, validator=_positive_int)

    clean_rms: float = field(default=0.1, converter=float, validator=_non_negative)

    @property
    def clip_samples(self) -> int:
        return round(self.clip_seconds * self.sample_rate)


@frozen
class TrainConfig:
    """Optimization schedule

    Adaptive-moment updates on full-sequence BPTT gradients, with global
    gradient-norm clipping and a learning rate reduced when validation SI-SNR
    stops improving.
    """

    epochs: int = field(default=10, validator=validators.instance_of(int))

    @epochs.validator
    def _check_epochs(_i: TrainConfig, _a: Attribute[int], _v: int) -> None:
        if _v < 0:
            raise ConfigError(f"Epoch count must be non-negative, got {_v}.")

    batches_per_epoch: int = field(default=20, validator=_positive_int)
    batch_size: int = field(default=4, validator=_positive_int)
    val_clips: int = field(default=8, validator=_positive_int)

    lr: float = field(default=2e-3, converter=float)

    @lr.validator
    def _check_lr(_i: TrainConfig, _a: Attribute[float], _v: float) -> None:
        if not (np.isfinite(_v) and _v > 0):
            raise ConfigError(f"Learning rate must be positive, got {_v}.")

    betas: tuple[float, float] = field(default=(0.9, 0.999))

    @betas.validator
    def _check_betas(_i: TrainConfig, _a: Attribute[tuple[float, float]], _v: tuple[float, float]) -> None:
        if len(_v) != 2 or not all(0 <= _b < 1 for _b in _v):
            raise ConfigError(f"Moment decay rates must lie in [0, 1), got {_v}.")

    eps: float = field(default=1e-8, converter=float, validator=_non_negative)

    grad_clip: float = field(default=5.0, converter=float, validator=_non_negative)
    """Global gradient-norm ceiling; 0 disables clipping"""

    plateau_patience: int = field(default=2, validator=validators.instance_of(int))
    lr_factor: float = field(default=0.5, converter=float)

    @lr_factor.validator
    def _check_lr_factor(_i: TrainConfig, _a: Attribute[float], _v: float) -> None:
        if not 0 < _v < 1:
            raise ConfigError(f"Learning-rate factor must lie in (0, 1), got {_v}.")


@dataclass(slots=True, frozen=True)
class SynthBatch:
    """Mixtures and their components, each :code:`[batch, 1, samples]`."""

    noisy: ArrayDouble
    clean: ArrayDouble
    noise: ArrayDouble
    snr_db: ArrayDouble
    kinds: tuple[NoiseKind, ...]


@dataclass(slots=True, frozen=True)
class EpochRecord:
    """One line of the training history; field order is the record layout."""

    epoch: int
    lr: float
    train_loss: float
    loss_offset: float
    loss_sisnr: float
    loss_mse: float
    loss_l1_bn: float
    loss_l1_ro: float
    val_si_snr: float
    val_si_snri: float
    spike_density: float
    bottleneck_density: float

    def to_json(self) -> str:
        return json.dumps(asdict(self))
