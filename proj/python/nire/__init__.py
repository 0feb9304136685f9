"""Event-guided image re-exposure: simulator, time encodings, model and training."""

from ._nire import *  # noqa: F401,F403
from ._nire import __doc__  # noqa: F401

__version__ = "0.1.0"
