"""Orientation estimation for D2-symmetric molecules from common lines."""

from ._scoring import BACKEND
from .errors import D2OrientError

__version__ = "0.1.0"

__all__ = ["BACKEND", "D2OrientError", "__version__"]
