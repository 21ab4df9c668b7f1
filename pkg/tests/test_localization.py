"""Unit tests for the boundary-resolvent decay ladder."""

import math

import numpy as np
import pytest

from anderson_lab.analysis.hamiltonian import build
from anderson_lab.analysis.localization import (
    boundary_value,
    check_localization_energy,
    localization_energy,
    localization_ladder,
    variant_threshold,
)
from anderson_lab.analysis.selfenergy import threshold_dipole, threshold_nonoverlapping, threshold_overlapping
from anderson_lab.core.errors import InadmissibleEnergyError, NonConvergenceError, PreconditionError
from anderson_lab.core.lattice import Box, Site, boundary
from anderson_lab.disorder.sampling import DisorderSample, sample_disorder


class TestThresholds:
    def test_overlapping(self, delta_potential):
        assert variant_threshold(0.1, delta_potential) == pytest.approx(threshold_overlapping(0.1, 1.0))

    def test_dipole(self, dipole_potential):
        assert variant_threshold(0.1, dipole_potential) == pytest.approx(threshold_dipole(0.1))

    def test_nonoverlapping_needs_energy(self, cell_potential):
        with pytest.raises(PreconditionError):
            variant_threshold(0.1, cell_potential)
        assert variant_threshold(0.1, cell_potential, -1.0) == pytest.approx(-0.08 * 17.0)

    def test_localization_energy(self, delta_potential):
        expected = threshold_overlapping(0.1, 1.0) - 0.1**3.5
        assert localization_energy(0.1, delta_potential, 0.5) == pytest.approx(expected)

    def test_nonoverlapping_localization_energy(self, cell_potential):
        offset = 0.1**3.5
        energy = localization_energy(0.1, cell_potential, 0.5)
        # E_0(E) = -1.04 + 0.32 E for the dipole cell at lambda = 0.1
        assert energy == pytest.approx(-(1.04 + offset) / 0.68, rel=1e-10)
        assert energy == pytest.approx(threshold_nonoverlapping(0.1, cell_potential, energy) - offset, rel=1e-12)
        check_localization_energy(0.1, cell_potential, energy, 0.5)

    def test_nonoverlapping_energy_diverges_at_strong_coupling(self, cell_potential):
        with pytest.raises(NonConvergenceError):
            localization_energy(0.3, cell_potential, 0.5)

    def test_check_energy(self, delta_potential):
        check_localization_energy(0.1, delta_potential, -0.1, 0.5)
        with pytest.raises(InadmissibleEnergyError):
            check_localization_energy(0.1, delta_potential, -0.02, 0.5)


class TestBoundaryValue:
    def test_matches_dense_resolvent(self, density, delta_potential):
        box = Box(Site.origin(), 2)
        sample = sample_disorder(density, box, seed=4, potential=delta_potential)
        h = build(box, 0.3, delta_potential, sample)
        inverse = np.linalg.inv(h.dense() + 0.8 * np.eye(h.dimension))
        row = inverse[box.index_of(box.center)]
        expected = max(abs(row[box.index_of(w)]) for w in boundary(box))
        assert boundary_value(box, 0.3, -0.8, delta_potential, sample) == pytest.approx(expected)


class TestLadder:
    def test_free_ladder_decays(self, density, delta_potential):
        result = localization_ladder([2, 3, 4], 0.0, -0.5, delta_potential, density, samples=5, seed=1)
        assert [r.samples for r in result.rows] == [1, 1, 1]
        assert result.strictly_decreasing()
        assert result.fit.rate > 0.5
        assert result.predicted_rate == pytest.approx(math.sqrt(1.0))
        assert not result.skip_flag

    def test_free_ladder_matches_zero_sample(self, density, delta_potential):
        box = Box(Site.origin(), 3)
        zero = DisorderSample.from_mapping({}, fill_box=box)
        result = localization_ladder([2, 3, 4], 0.0, -0.5, delta_potential, density, samples=1, seed=1)
        assert result.rows[1].median == pytest.approx(boundary_value(box, 0.0, -0.5, delta_potential, zero))

    def test_random_ladder(self, density, delta_potential):
        result = localization_ladder([3, 1, 2], 0.1, -0.5, delta_potential, density, samples=4, seed=7, workers=2)
        assert [r.radius for r in result.rows] == [1, 2, 3]
        assert all(r.samples == 4 and r.skipped == 0 for r in result.rows)
        assert all(r.q25 <= r.median <= r.q75 for r in result.rows)
        assert result.strictly_decreasing()
        assert result.threshold == pytest.approx(threshold_overlapping(0.1, 1.0))

    def test_moderate_disorder_ladder(self, density, delta_potential):
        energy = localization_energy(0.2, delta_potential, 0.5)
        assert energy == pytest.approx(-0.0832 - 0.2**3.5)
        result = localization_ladder([2, 3, 4, 5], 0.2, energy, delta_potential, density, samples=40, seed=5, nu=0.5)
        assert all(r.skipped == 0 for r in result.rows)
        assert result.strictly_decreasing()
        assert result.fit.rate > 0
        assert result.fit.significance >= 3

    def test_short_ladder(self, density, delta_potential):
        with pytest.raises(PreconditionError):
            localization_ladder([2, 3], 0.1, -0.5, delta_potential, density, samples=4, seed=1)
