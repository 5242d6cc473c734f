"""
Bundled run configurations, read with :mod:`importlib.resources`.

:code:`tiny.cfg` is a desk-scale model trained on short synthetic clips;
:code:`full.cfg` has the full-size dimensions (N = 512, B = 256, H = 512).

"""

from .. import VERSION  # noqa: TID252

__version__ = VERSION
