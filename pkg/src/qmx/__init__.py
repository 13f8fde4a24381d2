"""Numerical laboratory for quasilinear Maxwell equations with a perfectly conducting boundary."""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .grid import FieldState, GridSpec
from .initial_data import DataBundle, InitialJet, check_compatibility, compute_jet
from .linear import StepperConfig, solve_linear
from .materials import ConstantLaw, KerrLaw, vacuum
from .quasilinear import PicardConfig, SolveOutcome, continue_maximal, picard_slab

__all__ = [
    "BACKEND", "FieldState", "GridSpec", "DataBundle", "InitialJet", "check_compatibility", "compute_jet",
    "StepperConfig", "solve_linear", "ConstantLaw", "KerrLaw", "vacuum", "PicardConfig", "SolveOutcome",
    "continue_maximal", "picard_slab",
]
