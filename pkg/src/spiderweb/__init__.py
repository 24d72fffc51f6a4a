"""Certified numerics for fast-escaping sets of slowly growing entire functions."""

from .errors import Verdict
from .xnum import Enclosure, ExtReal, LevelReal

__all__ = ["Enclosure", "ExtReal", "LevelReal", "Verdict"]
__version__ = "0.1.0"
