"""
Mono 16 kHz WAV reading and writing.

Reads 16-bit PCM or 32-bit float WAV; writes 16-bit PCM, quantizing
:math:`x` as :math:`\\mathrm{clip}(\\mathrm{round}(32768 x), -32768, 32767)`
after clamping it to :math:`[-1, 1]`.

"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import soundfile as sf  # type: ignore
from attrs import Attribute, field, frozen

from .. import SAMPLE_RATE, VERSION, ArrayDouble, AudioFormatError  # noqa: TID252

__version__ = VERSION

logger = logging.getLogger(__name__)

PCM_SCALE = 32768

SUPPORTED_SUBTYPES = ("PCM_16", "FLOAT")


def _as_samples(_v: ArrayDouble) -> ArrayDouble:
    return np.asarray(_v, dtype=np.float64)


@frozen
class AudioClip:
    """Mono samples and their rate."""

    samples: ArrayDouble = field(converter=_as_samples, eq=False)

    @samples.validator
    def _check_samples(_i: AudioClip, _a: Attribute[ArrayDouble], _v: ArrayDouble) -> None:
        if _v.ndim != 1:
            raise AudioFormatError(f"Only mono audio is supported, got shape {_v.shape}.")
        if not np.isfinite(_v).all():
            raise AudioFormatError("Audio samples must be finite.")

    sample_rate: int = field(default=SAMPLE_RATE)

    @sample_rate.validator
    def _check_sample_rate(_i: AudioClip, _a: Attribute[int], _v: int) -> None:
        if _v != SAMPLE_RATE:
            raise AudioFormatError(f"Only {SAMPLE_RATE} Hz audio is supported, got {_v} Hz.")

    @property
    def seconds(self) -> float:
        return self.samples.size / self.sample_rate


def quantize(_samples: ArrayDouble, /) -> np.ndarray:
    """16-bit PCM codes of the clamped samples."""
    _x = np.clip(np.asarray(_samples, dtype=np.float64), -1.0, 1.0)
    return np.clip(np.round(_x * PCM_SCALE), -PCM_SCALE, PCM_SCALE - 1).astype("<i2")


def read_wav(_path: Path | str, /) -> AudioClip:
    """Read a mono, 16 kHz, 16-bit PCM or 32-bit float WAV file

    Raises
    ------
    FileNotFoundError
        If the file does not exist.
    AudioFormatError
        If the file is not such a WAV file.

    """
    _path = Path(_path)
    if not _path.is_file():
        raise FileNotFoundError(f"No such audio file: {_path}")
    try:
        _info = sf.info(str(_path))
    except (RuntimeError, sf.SoundFileError) as _err:
        raise AudioFormatError(f"{_path}: not a readable audio file ({_err}).") from _err

    if _info.format != "WAV":
        raise AudioFormatError(f"{_path}: expected a RIFF/WAVE file, got {_info.format}.")
    if _info.subtype not in SUPPORTED_SUBTYPES:
        raise AudioFormatError(
            f"{_path}: unsupported encoding {_info.subtype}; "
            "expected 16-bit PCM or 32-bit float."
        )
    if _info.channels != 1:
        raise AudioFormatError(f"{_path}: expected mono audio, got {_info.channels} channels.")
    if _info.samplerate != SAMPLE_RATE:
        raise AudioFormatError(
            f"{_path}: expected {SAMPLE_RATE} Hz audio, got {_info.samplerate} Hz."
        )

    _data, _sr = sf.read(str(_path), dtype="float64", always_2d=False)
    return AudioClip(_data, _sr)


def write_wav(_path: Path | str, _clip: AudioClip, /) -> None:
    """Write a 16-bit PCM WAV file, replacing any existing file atomically."""
    _path = Path(_path)
    _tmp = _path.with_name(f".{_path.name}.tmp")
    try:
        sf.write(
            str(_tmp),
            quantize(_clip.samples),
            _clip.sample_rate,
            subtype="PCM_16",
            format="WAV",
        )
        _tmp.replace(_path)
    finally:
        _tmp.unlink(missing_ok=True)
    logger.debug("Wrote %d samples to %s", _clip.samples.size, _path)
