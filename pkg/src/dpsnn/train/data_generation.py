"""
Synthetic noisy-speech mixtures for desk-scale training and evaluation.

Each clip draws from its own keyed random stream, so a batch is identical
whatever the number of worker threads.

"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np
from joblib import Parallel, delayed  # type: ignore
from numpy.random import Generator, SeedSequence
from scipy import signal  # type: ignore

from .. import VERSION, ArrayDouble, NoiseKind  # noqa: TID252
from ..core.pseudorandom_numbers import prng, spawn_seed_seqs  # noqa: TID252
from . import SynthBatch, SynthSpec

__version__ = VERSION

RAMP_SECONDS = 0.01
TEXTURE_SEGMENT_SECONDS = 0.25


def _ramp(_n: int, _nr: int, /) -> ArrayDouble:
    _env = np.ones(_n)
    _nr = min(_nr, _n // 2)
    if _nr:
        _r = 0.5 - 0.5 * np.cos(np.pi * np.arange(_nr) / _nr)
        _env[:_nr] = _r
        _env[_n - _nr :] = _r[::-1]
    return _env


def harmonic_clean(_spec: SynthSpec, _rng: Generator, /) -> ArrayDouble:
    """Voiced, speech-like tone: a harmonic stack with gliding pitch and syllabic envelope."""
    _n, _sr = _spec.clip_samples, _spec.sample_rate
    _t = np.arange(_n) / _sr

    _f0 = _rng.uniform(*_spec.f0_range) * (
        1 + 0.05 * np.sin(2 * np.pi * _rng.uniform(0.5, 3.0) * _t + _rng.uniform(0, 2 * np.pi))
    )
    _phase = 2 * np.pi * np.cumsum(_f0) / _sr
    _out = np.zeros(_n)
    for _k in range(1, _spec.n_harmonics + 1):
        # harmonics above Nyquist at the highest pitch are dropped
        if _k * _f0.max() >= _sr / 2:
            break
        _out += _rng.uniform(0.3, 1.0) / _k * np.sin(_k * _phase + _rng.uniform(0, 2 * np.pi))

    _am = 1 + 0.8 * np.sin(2 * np.pi * _rng.uniform(2.0, 6.0) * _t + _rng.uniform(0, 2 * np.pi))
    _on = int(_rng.uniform(0.0, 0.2) * _n)
    _off = _n - int(_rng.uniform(0.0, 0.2) * _n)
    _gate = np.zeros(_n)
    _gate[_on:_off] = _ramp(_off - _on, int(RAMP_SECONDS * _sr))

    _out *= _am * _gate
    _rms = np.sqrt(np.mean(_out**2))
    return _out * (_spec.clean_rms / _rms) if _rms > 0 else _out


def noise(_kind: NoiseKind, _spec: SynthSpec, _rng: Generator, /) -> ArrayDouble:
    """Unit-variance noise of the given family."""
    _n, _sr = _spec.clip_samples, _spec.sample_rate
    match _kind:
        case NoiseKind.WHITE:
            _out = _rng.standard_normal(_n)
        case NoiseKind.PINK:
            _spec_w = np.fft.rfft(_rng.standard_normal(_n))
            _f = np.fft.rfftfreq(_n, 1 / _sr)
            _shape = np.zeros_like(_f)
            _shape[1:] = 1 / np.sqrt(_f[1:])
            _out = np.fft.irfft(_spec_w * _shape, _n)
        case NoiseKind.TEXTURE:
            # band-passed segment, looped
            _seg = max(1, min(_n, int(TEXTURE_SEGMENT_SECONDS * _sr)))
            _fc = _rng.uniform(300.0, 3000.0)
            _sos = signal.butter(
                4, (_fc / 1.5, min(_fc * 1.5, 0.45 * _sr)), btype="bandpass", fs=_sr, output="sos"
            )
            _piece = signal.sosfilt(_sos, _rng.standard_normal(_seg + 512))[512:]
            _out = np.tile(_piece, -(-_n // _seg))[:_n]
    _std = _out.std()
    return _out / _std if _std > 0 else _out


def mix_at_snr(
    _clean: ArrayDouble, _noise: ArrayDouble, _snr_db: float, /
) -> tuple[ArrayDouble, ArrayDouble]:
    """Scale the noise so that :math:`10 \\log_{10}(P_{clean}/P_{noise})` is the target.

    Returns the mixture and the scaled noise.
    """
    _pc, _pn = np.mean(_clean**2), np.mean(_noise**2)
    _scaled = _noise * np.sqrt(_pc / (_pn * 10 ** (_snr_db / 10)))
    return _clean + _scaled, _scaled


def _synth_clip(
    _spec: SynthSpec, _seed_seq: SeedSequence, /
) -> tuple[ArrayDouble, ArrayDouble, ArrayDouble, float, NoiseKind]:
    _rng = prng(_seed_seq)
    _snr = float(_rng.choice(_spec.snr_db))
    _kind = _spec.noise_kinds[int(_rng.integers(len(_spec.noise_kinds)))]
    _clean = harmonic_clean(_spec, _rng)
    _noisy, _noise = mix_at_snr(_clean, noise(_kind, _spec, _rng), _snr)
    return _noisy, _clean, _noise, _snr, _kind


def synth_batch(
    _spec: SynthSpec,
    _seed: int,
    _count: int,
    /,
    *,
    stream: Sequence[int] = (),
    n_jobs: int = 1,
) -> SynthBatch:
    """Draw :code:`_count` mixtures

    Parameters
    ----------
    _spec
        Mixture specification.
    _seed
        Non-negative integer seed.
    _count
        Number of clips.
    stream
        Key path of this batch under the seed, e.g. :code:`(epoch, batch)`;
        clip :math:`i` draws from the stream :code:`(*stream, i)`.
    n_jobs
        Worker threads.

    Returns
    -------
        Mixtures, clean signals and scaled noise, each :code:`[count, 1, samples]`,
        with the drawn SNRs and noise kinds.

    """
    _clips = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_synth_clip)(_spec, _ss)
        for _ss in spawn_seed_seqs(_seed, _count, stream=stream)
    )
    _noisy, _clean, _noise, _snr, _kinds = zip(*_clips, strict=True)
    return SynthBatch(
        np.stack(_noisy)[:, None, :],
        np.stack(_clean)[:, None, :],
        np.stack(_noise)[:, None, :],
        np.array(_snr),
        tuple(_kinds),
    )
