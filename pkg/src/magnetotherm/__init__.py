"""Structure-preserving finite-difference simulator for non-isothermal magnetoviscoelastic fluids.

The package couples an incompressible MAC-grid velocity, a deformation tensor,
a temperature and a unit magnetization, and ships thermodynamic diagnostics
and equilibrium/stability tooling. ``MAGNETOTHERM_NUM_THREADS`` caps the
BLAS/OpenMP thread pools when set before the first import.
"""

import os as _os

_threads = _os.environ.get("MAGNETOTHERM_NUM_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from .config import SimConfig, load_config  # noqa: E402
from .errors import (  # noqa: E402
    CheckpointError,
    CoefficientError,
    ConfigError,
    ConstraintError,
    GhostError,
    GridError,
    MagnetothermError,
    NonFiniteState,
    PositivityLoss,
    SolverError,
)
from .grid import Grid, make_grid  # noqa: E402
from .laws import MaterialLaws, make_laws, validate_laws  # noqa: E402
from .state import FieldState, check_state, zero_state  # noqa: E402
from .timestepper import StepScheme, cfl_dt, run, step  # noqa: E402

__version__ = "0.1.0"

__all__ = [
    "CheckpointError",
    "CoefficientError",
    "ConfigError",
    "ConstraintError",
    "FieldState",
    "GhostError",
    "Grid",
    "GridError",
    "MagnetothermError",
    "MaterialLaws",
    "NonFiniteState",
    "PositivityLoss",
    "SimConfig",
    "SolverError",
    "StepScheme",
    "cfl_dt",
    "check_state",
    "load_config",
    "make_grid",
    "make_laws",
    "run",
    "step",
    "validate_laws",
    "zero_state",
]
