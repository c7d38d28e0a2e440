"""Sub-Poissonian atom-number preparation by Rydberg dressing and EIT loss.

The package computes collective loss rates from a non-Hermitian multi-atom
Hamiltonian in the symmetric (Dicke) basis and feeds them into a quantum-jump
rate chain over atom number.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    ConvergenceError,
    DomainError,
    HorizonTooShortError,
    ResourceError,
    SolverError,
)
from .params import NoiseModel, PhysicalParams

__all__ = [
    "__version__",
    "ConfigError",
    "ConvergenceError",
    "DomainError",
    "HorizonTooShortError",
    "ResourceError",
    "SolverError",
    "NoiseModel",
    "PhysicalParams",
]
