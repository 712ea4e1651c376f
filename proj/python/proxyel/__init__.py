"""Bi-encoder entity linking with proxy-based losses and FGSM training."""

from ._core import *  # noqa: F401,F403
from ._core import ProxyelError, __doc__  # noqa: F401

__version__ = "0.1.0"
