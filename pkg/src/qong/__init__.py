"""Quantum-noise-limited sensitivity of doubly resonant chi(2) ring gyroscopes."""

from .model import (
    DEG_PER_HOUR,
    REFERENCE_DESIGNS,
    REFERENCE_MDR,
    ModelParams,
    calibrated_chi,
    dual_design,
    fundamental_design,
    second_harmonic_design,
)
from .sensitivity import Infeasible, SensitivityReport, evaluate_point, linear_baseline
from .steady import SolverStrategy, critical_power, operating_point, solve_steady

__version__ = "0.1.0"

__all__ = [
    "DEG_PER_HOUR",
    "REFERENCE_DESIGNS",
    "REFERENCE_MDR",
    "Infeasible",
    "ModelParams",
    "SensitivityReport",
    "SolverStrategy",
    "calibrated_chi",
    "critical_power",
    "dual_design",
    "evaluate_point",
    "fundamental_design",
    "linear_baseline",
    "operating_point",
    "second_harmonic_design",
    "solve_steady",
]
