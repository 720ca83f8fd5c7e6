"""Detailed-balanced thermal Lindbladians and diagnostics for metastable states."""

from .estimator import MetastabilityFeatures
from .functionals import (
    adb_error,
    adb_error_int_log,
    entropy_production,
    fisher_information,
    metastability_report,
)
from .lindblad import LindbladOperator, build_full_lindbladian, evolve, time_averaged_state
from .markov import QuantumChannel, RecoveryMap, recovery_map
from .pauli import HamiltonianSpec, PauliString, Spectrum, diagonalize, gibbs_state, make_preset
from .spectral import FilterParams

__version__ = "0.1.0"

__all__ = [
    "FilterParams",
    "HamiltonianSpec",
    "LindbladOperator",
    "MetastabilityFeatures",
    "PauliString",
    "QuantumChannel",
    "RecoveryMap",
    "Spectrum",
    "adb_error",
    "adb_error_int_log",
    "build_full_lindbladian",
    "diagonalize",
    "entropy_production",
    "evolve",
    "fisher_information",
    "gibbs_state",
    "make_preset",
    "metastability_report",
    "recovery_map",
    "time_averaged_state",
]
