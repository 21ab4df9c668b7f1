"""Shared fixtures for the anderson-lab test suite."""

import pytest

from anderson_lab.core.lattice import Box, Site, TorusGrid
from anderson_lab.disorder.densities import uniform
from anderson_lab.disorder.potentials import DipolePotential, NonOverlappingPotential, OverlappingPotential


@pytest.fixture
def sample_config():
    """Minimal valid config for testing, sized for fast runs."""
    return {
        "schema_version": 1,
        "seed": 12345,
        "output_dir": "data/test_runs",
        "db_path": ":memory:",
        "threads": 2,
        "log_level": "DEBUG",
        "guards": {"max_radius": 16, "max_samples": 10_000},
        "experiments": {
            "green-decay": {
                "grid_points": 32,
                "energies": [-0.5, -1.0],
                "radius": 3,
                "envelope_radius": 5,
                "ratio_radius": 2,
            },
            "selfenergy": {
                "potential": "delta",
                "coupling": 0.1,
                "energy": -0.05,
                "grid_points": 16,
                "continuity_epsilons": [0.0, 1.0e-3, 1.0e-2],
            },
            "expansion-check": {
                "potential": "delta",
                "density": "uniform",
                "coupling": 0.1,
                "energy": -0.05,
                "epsilon": 1.0e-3,
                "radius": 1,
                "grid_points": 16,
                "orders": [1, 2, 3],
                "exhaustive_max_n": 3,
                "sampled_patterns": 50,
                "selection_constant": 1.0,
                "moment_radius": 4,
                "moment_samples": 100,
                "moment_orders": [1, 2],
            },
            "wegner": {
                "potential": "delta",
                "density": "uniform",
                "coupling": 2.0,
                "radius": 2,
                "center": -0.5,
                "widths": [0.1, 0.2],
                "samples": 40,
                "weyl_instances": 50,
            },
            "localization": {
                "potential": "delta",
                "coupling": 0.0,
                "energy": -0.5,
                "radii": [2, 3, 4],
                "samples": 5,
            },
            "dipole": {
                "coupling": 0.1,
                "grid_points": 16,
                "energy_offsets": [0.01, 0.05],
                "wall_radius": 40,
                "slab_radius": 3,
            },
        },
    }


@pytest.fixture
def grid():
    return TorusGrid(32)


@pytest.fixture
def small_box():
    """A 3^3 box centred at the origin."""
    return Box(Site.origin(), 1)


@pytest.fixture
def density():
    return uniform()


@pytest.fixture
def delta_potential():
    return OverlappingPotential.delta()


@pytest.fixture
def dipole_potential():
    return DipolePotential()


@pytest.fixture
def cell_potential():
    return NonOverlappingPotential.dipole_cell()
