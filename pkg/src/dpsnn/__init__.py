from __future__ import annotations

import enum
from pathlib import Path
from typing import TypeAlias

import numpy as np
from numpy.typing import NDArray

_PKG_NAME: str = Path(__file__).parent.stem

VERSION = "2026.740638.0"

__version__ = VERSION

np.set_printoptions(precision=18)


ArrayFloat = NDArray[np.half | np.single | np.double]

ArrayDouble: TypeAlias = NDArray[np.double]

DEFAULT_DTYPE = np.float64
"""Precision for training and gradient checks; inference may cast models to float32."""

SAMPLE_RATE = 16000
"""The only sample rate accepted for model I/O."""


@enum.unique
class SurrogateKind(enum.StrEnum):
    """Surrogate derivatives standing in for the Heaviside spike function."""

    ARCTAN = "arctan"
    MULTI_GAUSSIAN = "multi-Gaussian"


@enum.unique
class GateMode(enum.StrEnum):
    """Activation-suppression behaviors."""

    BINARIZE = "binarize"
    """Values below the threshold become 0, values above become 1"""

    PASS_ABOVE = "pass-above"
    """Values below the threshold become 0, values above pass unchanged"""


@enum.unique
class NoiseKind(enum.StrEnum):
    """Noise families for synthetic training mixtures."""

    WHITE = "white"
    PINK = "pink"
    TEXTURE = "texture"


class DpsnnError(Exception):
    """Base class for errors raised by this package."""


class DimensionError(DpsnnError, ValueError):
    """Array shapes do not agree with what an op or layer requires."""


class ConfigError(DpsnnError, ValueError):
    """Invalid configuration value or configuration-file key."""


class NumericError(DpsnnError, ArithmeticError):
    """Non-finite values, degenerate signals, or a diverging loss."""


class TapeError(DpsnnError, RuntimeError):
    """Misuse of a gradient tape."""


class AudioFormatError(DpsnnError, ValueError):
    """Unsupported audio encoding, channel count, or sample rate."""


class CheckpointError(DpsnnError, ValueError):
    """Corrupt, truncated, or incompatible checkpoint file."""
