"""Control-volume molecular dynamics of a WCA fluid.

Exact mass and momentum accounting over cuboidal control volumes, VA and
MOP local pressures, and the transient Couette solution they are tested
against. ``cvmd.BACKEND`` names the active kernel backend.
"""
from ._backend import BACKEND
from .analytic import CouetteParams, couette_shear_stress, couette_velocity, cv_momentum_history
from .core import BoxSpec, ConfigError, RunConfig, SimState, Tag, load_config
from .cv_budget import BudgetTracker, CVBudget, close_window
from .dynamics import Integrator, ThermostatState, init_couette, init_fcc
from .forces import NeighborList, build_cells, compute_forces
from .lcv import CVGrid, ControlVolume, theta
from .pressure import FaceAccumulator, VAAccumulator, va_tensor

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BoxSpec", "BudgetTracker", "CVBudget", "CVGrid", "ConfigError", "ControlVolume",
    "CouetteParams", "FaceAccumulator", "Integrator", "NeighborList", "RunConfig", "SimState",
    "Tag", "ThermostatState", "VAAccumulator", "build_cells", "close_window", "compute_forces",
    "couette_shear_stress", "couette_velocity", "cv_momentum_history", "init_couette", "init_fcc",
    "load_config", "theta", "va_tensor",
]
