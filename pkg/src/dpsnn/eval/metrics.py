"""
Objective metrics for enhanced speech, and an operation-count power proxy.

SI-SNR is computed on mean-removed signals, with a relative division guard
and a ceiling of :data:`SI_SNR_CAP_DB`. STOI is the standard short-time
objective intelligibility, from :mod:`pystoi`.

The power proxy counts effective synaptic operations per second of audio:
spikes times fan-out wherever a layer's input is binary, dense
multiply-accumulates wherever it is real-valued. Neuron state updates are
counted and reported separately.

"""

from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np
from pystoi import stoi as _pystoi  # type: ignore

from .. import VERSION, ArrayFloat, DimensionError, NumericError  # noqa: TID252
from ..model import SpikeStats  # noqa: TID252
from ..model.network import DpsnnModel  # noqa: TID252
from ..model.stream import latency  # noqa: TID252

__version__ = VERSION

logger = logging.getLogger(__name__)

SI_SNR_CAP_DB = 60.0
"""Ceiling on SI-SNR, reached by (near-)perfect estimates"""

SI_SNR_GUARD = 1e-8
"""Error-energy floor, relative to the target energy"""

SI_SNR_FLOOR_DB = -SI_SNR_CAP_DB
"""Score of a silent (zero-energy) estimate"""

STOI_MIN_SECONDS = 0.4

UNAVAILABLE = "unavailable"

REPORT_FIELDS = (
    "file",
    "si_snr",
    "si_snri",
    "stoi",
    "power_proxy",
    "pdp_proxy",
    "latency_ms",
    "pesq",
    "dnsmos",
)


@dataclass(slots=True, frozen=True)
class SiSnrResult:
    value_db: float
    capped: bool
    """True if the value was limited to the ceiling"""


def si_snr(_est: ArrayFloat, _ref: ArrayFloat, /) -> SiSnrResult:
    """Scale-invariant signal-to-noise ratio of an estimate

    Parameters
    ----------
    _est
        Estimated signal.
    _ref
        Clean reference, same length.

    Returns
    -------
        SI-SNR in dB, and whether it was capped. An estimate with zero energy
        after mean removal scores :data:`SI_SNR_FLOOR_DB`.

    Raises
    ------
    DimensionError
        If the lengths differ.
    NumericError
        If the reference has zero energy after mean removal.

    """
    _est, _ref = np.ravel(_est).astype(np.float64), np.ravel(_ref).astype(np.float64)
    if _est.size != _ref.size:
        raise DimensionError(
            f"Estimate and reference differ in length, {_est.size} vs {_ref.size}."
        )
    _s = _ref - _ref.mean()
    _e = _est - _est.mean()
    if not (_s2 := np.dot(_s, _s)) > 0:
        raise NumericError("SI-SNR reference has zero energy.")
    if not np.abs(_e).max(initial=0.0) > 0:
        logger.debug("Silent estimate scored at %.0f dB", SI_SNR_FLOOR_DB)
        return SiSnrResult(SI_SNR_FLOOR_DB, False)

    _target = np.dot(_e, _s) / _s2 * _s
    _noise = _e - _target
    _t2, _n2 = np.dot(_target, _target), np.dot(_noise, _noise)
    _value = 10 * np.log10(_t2 / (_n2 + SI_SNR_GUARD * _t2))
    if _value >= SI_SNR_CAP_DB:
        logger.debug("SI-SNR of %.2f dB capped at %.0f dB", _value, SI_SNR_CAP_DB)
        return SiSnrResult(SI_SNR_CAP_DB, True)
    return SiSnrResult(float(_value), False)


def si_snri(_est: ArrayFloat, _noisy: ArrayFloat, _ref: ArrayFloat, /) -> float:
    """SI-SNR improvement of the estimate over the unprocessed input, in dB."""
    return si_snr(_est, _ref).value_db - si_snr(_noisy, _ref).value_db


def stoi(_est: ArrayFloat, _ref: ArrayFloat, _sample_rate: int, /) -> float:
    """Short-time objective intelligibility, in [0, 1]

    Raises
    ------
    DimensionError
        If the signals differ in length or are shorter than
        :data:`STOI_MIN_SECONDS`.

    """
    _est, _ref = np.ravel(_est).astype(np.float64), np.ravel(_ref).astype(np.float64)
    if _est.size != _ref.size:
        raise DimensionError(
            f"Estimate and reference differ in length, {_est.size} vs {_ref.size}."
        )
    if _ref.size < STOI_MIN_SECONDS * _sample_rate:
        raise DimensionError(
            f"STOI needs at least {STOI_MIN_SECONDS} s of audio, got {_ref.size} samples."
        )
    return float(np.clip(_pystoi(_ref, _est, _sample_rate, extended=False), 0.0, 1.0))


@dataclass(slots=True, frozen=True)
class PowerReport:
    """Operation rates per second of audio."""

    synops_per_s: float
    neuron_updates_per_s: float
    power_proxy: float
    pdp_proxy: float
    """Power proxy times algorithmic latency in seconds"""
    excludes_codec: bool


def synaptic_ops(
    _stats: SpikeStats, _model: DpsnnModel, /, *, exclude_codec: bool = True
) -> tuple[int, int]:
    """Effective synaptic operations and neuron updates behind the tallies.

    Per batch-frame: :math:`N B` dense bottleneck MACs; SCNN input ones times
    :math:`(H/B) K_{ctx}`; SRNN input spikes and recurrent spikes times
    :math:`B`; readout input spikes times :math:`B`; surviving readout
    values times :math:`N` in the mask head; and, unless excluded,
    :math:`2 L N` encoder and decoder MACs.
    """
    _cfg = _model.config
    _n, _l = _cfg.encoder.n_channels, _cfg.encoder.filter_length
    _b, _h = _cfg.separator.n_bottleneck, _cfg.separator.n_hidden

    _ops = _stats.slots * _n * _b
    _spikes_in = _stats.bottleneck_ones
    _updates = _b
    if _cfg.use_scnn:
        _ops += _stats.bottleneck_ones * (_h // _b) * _cfg.separator.context_steps
        _spikes_in = _stats.scnn_spikes
        _updates += _h
    if _cfg.use_srnn:
        _ops += (_spikes_in + _stats.srnn_spikes) * _b
        _spikes_in = _stats.srnn_spikes
        _updates += _b
    _ops += _spikes_in * _b + _stats.readout_nonzero * _n
    if not exclude_codec:
        _ops += _stats.slots * 2 * _l * _n
    return _ops, _stats.slots * _updates


def power_proxy(
    _stats: SpikeStats,
    _model: DpsnnModel,
    _audio_seconds: float,
    /,
    *,
    exclude_codec: bool = True,
) -> PowerReport:
    """Effective synaptic operations per second of processed audio

    Parameters
    ----------
    _stats
        Tallies from one or more forward passes.
    _model
        The model that produced them.
    _audio_seconds
        Total duration of the audio behind the tallies, over the batch.
    exclude_codec
        Leave out encoder and decoder operations.

    Raises
    ------
    NumericError
        If the duration is not positive.

    """
    if not _audio_seconds > 0:
        raise NumericError(f"Audio duration must be positive, got {_audio_seconds}.")
    _ops, _updates = synaptic_ops(_stats, _model, exclude_codec=exclude_codec)
    _rate = _ops / _audio_seconds
    _lat_s = latency(_model.config.encoder, _model.config.sample_rate).algorithmic_ms / 1000
    return PowerReport(
        _rate, _updates / _audio_seconds, _rate, _rate * _lat_s, exclude_codec
    )


def report_row(
    _file: str,
    _si_snr: float,
    _si_snri: float,
    _stoi: float,
    _power: PowerReport,
    _latency_ms: float,
    /,
) -> dict[str, Any]:
    """Report record with the fields of :data:`REPORT_FIELDS`, in order."""
    return dict(
        zip(
            REPORT_FIELDS,
            (
                _file,
                _si_snr,
                _si_snri,
                _stoi,
                _power.power_proxy,
                _power.pdp_proxy,
                _latency_ms,
                UNAVAILABLE,
                UNAVAILABLE,
            ),
            strict=True,
        )
    )


def aggregate_rows(
    _rows: Sequence[Mapping[str, Any]], /, *, label: str = "mean"
) -> dict[str, Any]:
    """Field-wise mean of numeric report fields."""
    if not _rows:
        raise ValueError("No report rows to aggregate.")
    return {
        _f: (
            label
            if _f == "file"
            else UNAVAILABLE
            if _rows[0][_f] == UNAVAILABLE
            else float(np.mean([_r[_f] for _r in _rows]))
        )
        for _f in REPORT_FIELDS
    }
