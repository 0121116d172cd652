"""Exact self-similar soliton solutions of nonautonomous cubic Schroedinger
equations with quadratic Hamiltonians, and independent numerical checks."""

from .errors import SolitonForgeError
from .characteristic import QuadraticCoefficients, make_preset, solve_basis
from .kernels import PhaseKernels, PhaseState, base_kernels, propagate
from .profile import ProfileKind, SolitonProfile, build_profile_m0, build_profile_m1
from .assembler import SolitonSolution, assemble, evaluate_psi
from .scenarios import load_scenario, run_scenario, scenario_catalog

__version__ = "0.1.0"

__all__ = [
    "SolitonForgeError",
    "QuadraticCoefficients",
    "make_preset",
    "solve_basis",
    "PhaseKernels",
    "PhaseState",
    "base_kernels",
    "propagate",
    "ProfileKind",
    "SolitonProfile",
    "build_profile_m0",
    "build_profile_m1",
    "SolitonSolution",
    "assemble",
    "evaluate_psi",
    "load_scenario",
    "run_scenario",
    "scenario_catalog",
]
