"""Simplified multi-region direct-air-capture deployment model."""

from .model import *  # noqa: F401,F403
from .model import __all__ as _model_all
from .qoi import *  # noqa: F401,F403
from .qoi import __all__ as _qoi_all
from .run import run_from_values, trajectory_rows

__all__ = list(_model_all) + list(_qoi_all) + ["run_from_values", "trajectory_rows"]
