"""Simulated learning-based bin picking: multi-view sensing, fusion, swept-volume features and a random forest."""
from ._accel import USE_NUMBA
from .errors import BinpickError

__version__ = "0.1.0"

__all__ = ["BinpickError", "USE_NUMBA", "__version__"]
