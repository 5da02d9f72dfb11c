"""Exact diagonalization and ergodicity diagnostics for the anisotropic Dicke model."""
from adicke.model import (
    ModelParams,
    SectorBasis,
    OperatorMatrix,
    enumerate_basis,
    build_hamiltonian,
    observable_matrix,
    symmetry_partner,
)

__version__ = "0.1.0"
