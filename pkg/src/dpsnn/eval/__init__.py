"""
Evaluation metrics and report records.

"""

from .. import VERSION  # noqa: TID252

__version__ = VERSION
