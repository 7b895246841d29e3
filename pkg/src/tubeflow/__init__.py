"""Two-phase (gas-liquid) vertical-tube solver on a D1Q3 lattice.

Six coupled kinetic schemes advance the Eulerian-Eulerian equations of a
one-dimensional vertical tube (pressure-velocity for both phases, a volume
fraction scheme per phase, and two stateless samplers for the interphase
mass-exchange divergence), with an independent finite-difference engine,
closed-form steady-state checks, and a comparison / convergence harness.
"""

from .config import ScenarioConfig, preset, rescale, read_config, write_config
from .lbm import SolverAbort, run as run_lbm
from .fd import run as run_fd
from .harness import (ComparisonReport, compare, convergence_study, run_case,
                      test_preset)

__version__ = "0.1.0"

__all__ = [
    "ScenarioConfig", "preset", "rescale", "read_config", "write_config",
    "SolverAbort", "run_lbm", "run_fd",
    "ComparisonReport", "compare", "convergence_study", "run_case",
    "test_preset", "__version__",
]
