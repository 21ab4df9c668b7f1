"""Green functions, self energies, finite-volume spectra and the resolvent expansion."""

from .expansion import ExpansionOperators, telescoping_check
from .green import free_green, renormalized_green
from .hamiltonian import FiniteHamiltonian, ResolventSolver, SpectralWindow, build
from .partitions import CumulantTable, Partition, enumerate_partitions
from .selfenergy import solve_sigma_dipole, solve_sigma_nonoverlapping, solve_sigma_overlapping
from .wegner import HermitianPair, mc_wegner

__all__ = [
    "free_green",
    "renormalized_green",
    "solve_sigma_overlapping",
    "solve_sigma_dipole",
    "solve_sigma_nonoverlapping",
    "FiniteHamiltonian",
    "ResolventSolver",
    "SpectralWindow",
    "build",
    "ExpansionOperators",
    "telescoping_check",
    "Partition",
    "CumulantTable",
    "enumerate_partitions",
    "HermitianPair",
    "mc_wegner",
]
