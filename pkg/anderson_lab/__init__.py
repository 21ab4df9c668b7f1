"""anderson-lab: desk-scale numerics for alloy-type random Schroedinger operators on Z^3.

Canonical import paths:
  anderson_lab.core.lattice          - Site, Box, Momentum, TorusGrid, torus_quadrature
  anderson_lab.core.models           - SolverReport, DecayFit, WegnerRow, LocalizationRow, DipoleRow
  anderson_lab.core.errors           - LabError and its subclasses
  anderson_lab.core.ledger           - RunLedger, RunLedgerStore
  anderson_lab.disorder.potentials   - OverlappingPotential, DipolePotential, NonOverlappingPotential
  anderson_lab.disorder.densities    - DisorderDensity, uniform, raised_cosine, holder_bump
  anderson_lab.disorder.sampling     - DisorderSample, sample_disorder, alloy_field
  anderson_lab.analysis.green        - free_green, envelope_check, renormalized_green, decay_fit
  anderson_lab.analysis.selfenergy   - solve_sigma_overlapping, solve_sigma_dipole,
                                       solve_sigma_nonoverlapping, BlochFiber
  anderson_lab.analysis.hamiltonian  - FiniteHamiltonian, ResolventSolver, trace_projector,
                                       ground_energy, dipole_wall_ground
  anderson_lab.analysis.expansion    - enumerate_terms, build_A, build_A_tilde, telescoping_check,
                                       mc_moment_A
  anderson_lab.analysis.partitions   - enumerate_partitions, cumulants_from_moments,
                                       tadpole_cancellation_check
  anderson_lab.analysis.wegner       - HermitianPair, weyl_interval_bound, lipschitz_approx, mc_wegner
  anderson_lab.analysis.localization - localization_ladder
  anderson_lab.experiments.config    - ExperimentConfig
  anderson_lab.experiments.runner    - ExperimentRunner
  anderson_lab.experiments.output    - TableWriter
"""

from .analysis.selfenergy import solve_sigma_dipole, solve_sigma_nonoverlapping, solve_sigma_overlapping
from .core.lattice import Box, Site, TorusGrid
from .core.ledger import RunLedger, RunLedgerStore
from .disorder.densities import DisorderDensity
from .disorder.potentials import DipolePotential, NonOverlappingPotential, OverlappingPotential
from .experiments.config import ExperimentConfig
from .experiments.runner import ExperimentRunner

__all__ = [
    # core
    "Site",
    "Box",
    "TorusGrid",
    "RunLedger",
    "RunLedgerStore",
    # disorder
    "OverlappingPotential",
    "DipolePotential",
    "NonOverlappingPotential",
    "DisorderDensity",
    # analysis
    "solve_sigma_overlapping",
    "solve_sigma_dipole",
    "solve_sigma_nonoverlapping",
    # experiments
    "ExperimentConfig",
    "ExperimentRunner",
]
