"""
WAV files and model checkpoints.

"""

from .. import VERSION  # noqa: TID252

__version__ = VERSION
