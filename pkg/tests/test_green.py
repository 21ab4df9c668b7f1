"""Unit tests for lattice Green functions, envelopes and decay fits."""

import math

import numpy as np
import pytest

from anderson_lab.analysis.green import (
    GreenTable,
    decay_fit,
    decay_fit_series,
    defining_relation_residual,
    envelope_check,
    free_green,
    free_green_table,
    predicted_decay_rate,
    propsigma_domination_check,
    psi_envelope,
    ratio_bound_check,
    ratio_bound_violations,
    renormalized_green,
    renormalized_green_table,
)
from anderson_lab.analysis.selfenergy import (
    solve_sigma_dipole,
    solve_sigma_nonoverlapping,
    solve_sigma_overlapping,
    threshold_dipole,
    threshold_nonoverlapping,
)
from anderson_lab.core.errors import DomainError, OutOfResolventSetError, PreconditionError
from anderson_lab.core.lattice import Site, TorusGrid, offsets_within
from anderson_lab.disorder.potentials import NonOverlappingPotential, OverlappingPotential


class TestFreeGreen:
    def test_symmetric_and_positive(self, grid):
        table = free_green_table(-0.5, offsets_within(3), grid)
        assert table.is_symmetric()
        assert all(table.real(w) > 0 for w in table.values)

    def test_decreasing_along_axis(self, grid):
        table = free_green_table(-0.5, [Site(r, 0, 0) for r in range(6)], grid)
        values = [table.real(Site(r, 0, 0)) for r in range(6)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_defining_relation(self, grid):
        assert defining_relation_residual(-0.5, 3, grid) < 1e-10

    def test_large_negative_energy(self):
        """G_E(0, 0) -> 1/(3 - E) to leading order as E -> -infinity."""
        value = free_green(-100.0, Site.origin(), TorusGrid(16))
        assert value == pytest.approx(1.0 / 103.0, rel=1e-3)

    def test_positive_energy_rejected(self, grid):
        with pytest.raises(OutOfResolventSetError):
            free_green_table(0.0, [Site.origin()], grid)

    def test_csv_rows(self, grid):
        table = free_green_table(-1.0, [Site(1, 0, 0), Site.origin()], grid)
        rows = table.to_csv_rows()
        assert [r[:3] for r in rows] == [[0, 0, 0], [1, 0, 0]]
        assert len(GreenTable.csv_header()) == 5


class TestRatioBound:
    @pytest.mark.parametrize("energy", [-0.1, -0.5, -2.0])
    def test_no_violations(self, energy, grid):
        assert ratio_bound_violations(energy, 3, grid) == []

    def test_single_pair(self, grid):
        assert ratio_bound_check(-0.5, Site(2, 1, 0), Site(0, 0, 1), grid)

    def test_origin_excluded(self, grid):
        with pytest.raises(PreconditionError):
            ratio_bound_check(-0.5, Site.origin(), Site(1, 0, 0), grid)

    def test_non_unit_step(self, grid):
        with pytest.raises(PreconditionError):
            ratio_bound_check(-0.5, Site(1, 0, 0), Site(1, 1, 0), grid)


class TestEnvelope:
    def test_psi_at_origin(self):
        assert psi_envelope(9.0, -0.5, 0.0) == pytest.approx(1.0)
        assert psi_envelope(9.0, -4.0, 0.0) == pytest.approx(2.0)

    def test_psi_requires_three_dimensions(self):
        with pytest.raises(PreconditionError):
            psi_envelope(9.0, -0.5, 1.0, d=2)

    def test_envelope_ratio_finite_and_stable(self, grid):
        check = envelope_check(-0.5, 6, grid)
        assert math.isfinite(check.worst_ratio)
        assert check.min_value > 0
        assert check.stable(4, 6)
        assert list(check.worst_by_radius) == list(range(7))

    def test_envelope_needs_negative_energy(self, grid):
        with pytest.raises(OutOfResolventSetError):
            envelope_check(0.5, 3, grid)


class TestDecayFit:
    def test_exact_exponential(self):
        r = np.arange(1, 8)
        fit = decay_fit_series(r, 2.0 * np.exp(-0.3 * r))
        assert fit.rate == pytest.approx(0.3)
        assert fit.prefactor == pytest.approx(2.0)
        assert fit.residual == pytest.approx(0.0, abs=1e-12)

    def test_constant_values(self):
        fit = decay_fit_series([1, 2, 3, 4, 5], [0.5] * 5)
        assert fit.rate == 0.0
        assert fit.significance == 0.0

    def test_too_few_points(self):
        with pytest.raises(PreconditionError):
            decay_fit_series([1, 2], [1.0, 0.5])

    def test_nonpositive_values(self):
        with pytest.raises(DomainError):
            decay_fit_series([1, 2, 3, 4, 5], [1.0, 0.5, 0.0, 0.1, 0.1])

    def test_free_green_decays(self, grid):
        table = free_green_table(-1.0, [Site(r, 0, 0) for r in range(9)], grid)
        fit = decay_fit({w: table.real(w) for w in table.values}, r_min=2.0)
        # asymptotic axis rate 2 asinh(sqrt(-E/2)) plus the algebraic prefactor
        assert fit.rate > 2.0 * math.asinh(math.sqrt(0.5))
        assert fit.points == 7


class TestPredictedRate:
    def test_overlapping(self):
        rate = predicted_decay_rate("overlapping", 0.1, -0.1, -0.0202, 0.5)
        e_star = 0.1**3.5 / 2
        assert rate == pytest.approx(math.sqrt(-0.0202 + 0.1 - e_star) / (math.sqrt(6) * math.pi))

    def test_nonoverlapping(self):
        assert predicted_decay_rate("nonoverlapping", 0.1, -0.3, -0.2, 0.5) == pytest.approx(math.sqrt(0.2 / 3))

    def test_dipole(self):
        e_d = threshold_dipole(0.1)
        e_star = 0.1**3.5 / 2
        assert predicted_decay_rate("dipole", 0.1, -0.1, e_d, 0.5) == pytest.approx(math.sqrt((e_d + 0.1 - e_star) / 2))

    def test_above_threshold_is_zero(self):
        assert predicted_decay_rate("overlapping", 0.1, 0.0, -0.0202, 0.5) == 0.0

    def test_unknown_variant(self):
        with pytest.raises(PreconditionError):
            predicted_decay_rate("magnetic", 0.1, -0.1, -0.02, 0.5)


class TestRenormalizedGreen:
    def test_delta_equals_shifted_free(self):
        """A constant sigma shifts the energy: R_r(w) = G_{E + sigma}(0, w)."""
        grid = TorusGrid(16)
        sigma = solve_sigma_overlapping(0.1, -0.05, 0.0, OverlappingPotential.delta(), grid)
        shift = sigma.coefficients[Site.origin()].real
        offsets = offsets_within(2)
        table = renormalized_green_table(-0.05, 0.0, sigma, offsets, grid)
        free = free_green_table(-0.05 + shift, offsets, grid)
        for w in offsets:
            assert table[w].real == pytest.approx(free.real(w), rel=1e-9)

    def test_single_entry_matches_table(self):
        grid = TorusGrid(16)
        sigma = solve_sigma_dipole(0.1, threshold_dipole(0.1) - 0.02, 0.0, grid)
        w = Site(2, -1, 0)
        table = renormalized_green_table(sigma.energy, 0.0, sigma, [w], grid)
        assert renormalized_green(sigma.energy, 0.0, sigma, w, grid) == pytest.approx(table[w])

    def test_matrix_single_site_matches_scalar(self):
        grid = TorusGrid(16)
        scalar = solve_sigma_overlapping(0.1, -0.05, 0.0, OverlappingPotential.delta(), grid)
        matrix = solve_sigma_nonoverlapping(0.1, -0.05, 0.0, NonOverlappingPotential.single_site(), grid)
        offsets = [Site.origin(), Site(1, 0, 0), Site(1, 2, -1)]
        a = renormalized_green_table(-0.05, 0.0, scalar, offsets, grid)
        b = renormalized_green_table(-0.05, 0.0, matrix, offsets, grid)
        for w in offsets:
            assert b[w] == pytest.approx(a[w], rel=1e-8)

    def test_matrix_entry_matches_table(self):
        grid = TorusGrid(8)
        u = NonOverlappingPotential.dipole_cell()
        sigma = solve_sigma_nonoverlapping(0.1, -0.5, 0.0, u, grid)
        w = Site(1, 1, 0)
        table = renormalized_green_table(-0.5, 0.0, sigma, [w], grid)
        assert renormalized_green(-0.5, 0.0, sigma, w, grid) == pytest.approx(table[w])


class TestDomination:
    def test_dipole_cell_dominated_by_shifted_free_green(self):
        grid = TorusGrid(32)
        u = NonOverlappingPotential.dipole_cell()
        sigma = solve_sigma_nonoverlapping(0.05, -0.3, 0.0, u, grid)
        check = propsigma_domination_check(sigma, grid, radius=4)
        # kappa = 0.02, E0 = -kappa ((6 + 0.6) * 2 + 1)
        assert check.threshold == pytest.approx(-0.284)
        assert check.shifted_energy == pytest.approx(-0.158)
        assert check.max_excess < 0
        assert check.holds

    def test_zero_coupling_is_the_free_green_function(self):
        grid = TorusGrid(16)
        sigma = solve_sigma_nonoverlapping(0.0, -0.5, 0.0, NonOverlappingPotential.single_site(), grid)
        check = propsigma_domination_check(sigma, grid, radius=2)
        assert check.threshold == 0.0
        assert abs(check.max_excess) < 1e-9

    def test_energy_between_threshold_and_kappa(self):
        grid = TorusGrid(8)
        u = NonOverlappingPotential.dipole_cell()
        sigma = solve_sigma_nonoverlapping(0.05, -0.25, 0.0, u, grid)
        assert -0.25 > threshold_nonoverlapping(0.05, u, -0.25)
        with pytest.raises(PreconditionError):
            propsigma_domination_check(sigma, grid)
