"""Finite-volume solver and verification harness for the compressible k-epsilon system.

Modules
-------
grid      box grids, ghost cells, difference operators, snapshot I/O
model     physical constants, state container, constitutive terms
linstep   time steps of the linearised system and its full-horizon march
picard    successive-linearisation iteration and its contraction report
analysis  Sobolev norms, estimate constants, initial-data checks, diagnostics
cli       ``keps`` command line
"""

from .errors import KepsError
from .grid import GridSpec
from .linstep import StepConfig, linearized_solve
from .model import ModelParams, State, Trajectory
from .picard import PicardConfig, picard_march, picard_solve

__version__ = "0.1.0"

__all__ = [
    "GridSpec",
    "KepsError",
    "ModelParams",
    "PicardConfig",
    "State",
    "StepConfig",
    "Trajectory",
    "linearized_solve",
    "picard_march",
    "picard_solve",
]
