"""Unit tests for counter-based disorder sampling and the alloy potential."""

import numpy as np
import pytest

from anderson_lab.core.errors import IncompleteSampleError
from anderson_lab.core.lattice import Box, Site
from anderson_lab.disorder.densities import uniform
from anderson_lab.disorder.potentials import DipolePotential, NonOverlappingPotential, OverlappingPotential
from anderson_lab.disorder.sampling import (
    DisorderSample,
    alloy_field,
    alloy_potential,
    sample_disorder,
    sample_seed,
    site_uniform,
)


class TestSiteUniform:
    def test_open_unit_interval(self):
        draws = [site_uniform(11, (i, -i, 2 * i)) for i in range(50)]
        assert all(0.0 < u < 1.0 for u in draws)

    def test_deterministic(self):
        assert site_uniform(5, (1, 2, 3)) == site_uniform(5, (1, 2, 3))

    def test_seed_and_site_matter(self):
        assert site_uniform(5, (1, 2, 3)) != site_uniform(6, (1, 2, 3))
        assert site_uniform(5, (1, 2, 3)) != site_uniform(5, (3, 2, 1))


class TestSampleSeed:
    def test_stable_and_distinct(self):
        seeds = [sample_seed(42, k) for k in range(20)]
        assert seeds == [sample_seed(42, k) for k in range(20)]
        assert len(set(seeds)) == 20

    def test_large_master_seed(self):
        assert 0 <= sample_seed(2**64 - 1, 0) < 2**64


class TestSampleDisorder:
    def test_values_in_support(self):
        sample = sample_disorder(uniform(), Box(Site.origin(), 2), seed=9)
        assert sample.values.shape == (5, 5, 5)
        assert np.all(np.abs(sample.values) <= np.sqrt(3.0))

    def test_independent_of_region(self):
        """The coupling at a site does not depend on which box was sampled."""
        small = sample_disorder(uniform(), Box(Site.origin(), 1), seed=4)
        large = sample_disorder(uniform(), Box(Site(1, 0, 0), 3), seed=4)
        for s in Box(Site.origin(), 1).sites():
            assert small.omega(s) == large.omega(s)

    def test_potential_grows_region(self):
        u = OverlappingPotential.exponential(1.0, 6.0)
        sample = sample_disorder(uniform(), Box(Site.origin(), 1), seed=1, potential=u)
        side = 2 * (1 + u.radius) + 1
        assert sample.values.shape == (side, side, side)

    def test_period_lattice(self):
        sample = sample_disorder(uniform(), Box(Site.origin(), 2), period=(2, 1, 1), seed=2)
        assert sample.values.shape == (3, 5, 5)
        with pytest.raises(KeyError):
            sample.omega(Site(1, 0, 0))

    def test_empirical_variance(self):
        sample = sample_disorder(uniform(), Box(Site.origin(), 6), seed=7)
        assert np.var(sample.values) == pytest.approx(1.0, abs=0.1)


class TestDisorderSample:
    def test_from_mapping_lookup(self):
        sample = DisorderSample.from_mapping({Site(0, 0, 0): 0.5, Site(2, 1, 0): -1.0})
        assert sample.omega(Site(2, 1, 0)) == -1.0
        assert sample.omega(Site.origin()) == 0.5

    def test_missing_coupling_raises(self):
        sample = DisorderSample.from_mapping({Site(0, 0, 0): 0.5, Site(2, 0, 0): 1.0})
        with pytest.raises(IncompleteSampleError):
            sample.omega(Site(1, 0, 0))
        with pytest.raises(IncompleteSampleError):
            sample.omega(Site(5, 0, 0))

    def test_fill_box(self):
        sample = DisorderSample.from_mapping({Site(1, 0, 0): 2.0}, fill_box=Box(Site.origin(), 1))
        assert sample.omega(Site(1, 0, 0)) == 2.0
        assert sample.omega(Site(-1, 1, 0)) == 0.0


class TestAlloyPotential:
    def test_dipole_pointwise(self):
        u = DipolePotential()
        sample = DisorderSample.from_mapping({Site(0, 0, 0): 0.3, Site(-1, 0, 0): 0.7})
        # V(0) = omega_0 u(0) + omega_{-1} u(e1)
        assert alloy_potential(sample, u, Site.origin()) == pytest.approx(0.3 - 0.7)

    @pytest.mark.parametrize(
        "u", [OverlappingPotential.delta(), DipolePotential(), NonOverlappingPotential.dipole_cell()]
    )
    def test_field_matches_pointwise(self, u):
        box = Box(Site.origin(), 2)
        sample = sample_disorder(uniform(), box, period=u.period, seed=13, potential=u)
        field_values = alloy_field(sample, u, box)
        expected = [alloy_potential(sample, u, s) for s in box.sites()]
        assert field_values == pytest.approx(expected)

    def test_incomplete_sample(self):
        sample = DisorderSample.from_mapping({Site(0, 0, 0): 1.0})
        with pytest.raises(IncompleteSampleError):
            alloy_field(sample, DipolePotential(), Box(Site.origin(), 1))
