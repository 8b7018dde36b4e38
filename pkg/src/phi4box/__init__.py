"""Structure-preserving finite-difference integrators for the nonlinear wave
(lambda phi^4) equation in 1+1 dimensions, with local and global conservation
diagnostics and an experiment harness."""

from .model import (
    GridSpec,
    PotentialParams,
    ScalarRows,
    ZetaRow,
    exact_initial_energy,
    initial_condition_sine,
    lightcone_map,
    lightcone_map_inverse,
    potential_deriv,
    potential_value,
)

__version__ = "0.1.0"

__all__ = [
    "GridSpec",
    "PotentialParams",
    "ScalarRows",
    "ZetaRow",
    "exact_initial_energy",
    "initial_condition_sine",
    "lightcone_map",
    "lightcone_map_inverse",
    "potential_deriv",
    "potential_value",
    "__version__",
]
