"""Deterministic simulation, planning, and evaluation kernel for two
abstract sports tasks: a table-tennis rally return and a soccer penalty
shot, both driven by kinematic plants and scripted controllers."""

__version__ = "0.1.0"

from .core import BallState, PaddleState, RngStream, derive_stream  # noqa: F401
from .config import KernelConfig, load_config  # noqa: F401
