"""Unit tests for disorder densities."""

import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import integrate

from anderson_lab.disorder.densities import (
    DENSITY_PRESETS,
    DisorderDensity,
    density_from_name,
    holder_bump,
    raised_cosine,
    uniform,
)


class TestPresets:
    @pytest.mark.parametrize("name", sorted(DENSITY_PRESETS))
    def test_unit_variance(self, name):
        assert density_from_name(name).moment(2) == pytest.approx(1.0, rel=1e-6)

    @pytest.mark.parametrize("name", sorted(DENSITY_PRESETS))
    def test_even(self, name):
        d = density_from_name(name)
        x = np.linspace(-d.half_width, d.half_width, 41)
        assert d.pdf(x) == pytest.approx(d.pdf(-x))
        assert d.moment(3) == 0.0

    @pytest.mark.parametrize("name", sorted(DENSITY_PRESETS))
    def test_pdf_vanishes_outside_support(self, name):
        d = density_from_name(name)
        assert d.pdf(d.half_width + 0.1) == 0.0
        assert d.pdf(-d.half_width - 0.1) == 0.0

    @pytest.mark.parametrize("name", sorted(DENSITY_PRESETS))
    def test_holder_certificate(self, name):
        holds, worst = density_from_name(name).holder_certificate(pairs=2000, seed=3)
        assert holds, worst

    def test_unknown_preset(self):
        with pytest.raises(ValueError, match="unknown density"):
            density_from_name("gaussian")

    def test_bad_holder_exponent(self):
        with pytest.raises(ValueError):
            DisorderDensity("x", uniform().dist, 1.0, alpha=0.0, holder_k=1.0)


class TestUniform:
    def test_support(self):
        assert uniform().support == pytest.approx((-math.sqrt(3), math.sqrt(3)))

    def test_exact_moments(self):
        moments = uniform().exact_moments(3)
        assert moments == {2: Fraction(1), 4: Fraction(9, 5), 6: Fraction(27, 7)}

    def test_exact_matches_numeric(self):
        d = uniform()
        assert float(d.exact_moments(2)[4]) == pytest.approx(d.moment(4))


class TestHolderBump:
    def test_normalized(self):
        d = holder_bump()
        x = np.linspace(-d.half_width, d.half_width, 200_001)
        assert integrate.trapezoid(d.pdf(x), x) == pytest.approx(1.0, abs=1e-5)

    def test_cdf_ppf_consistent(self):
        d = holder_bump()
        x = np.array([-1.5, -0.7, 0.0, 0.2, 1.1])
        assert d.ppf(d.cdf(x)) == pytest.approx(x, abs=1e-9)

    def test_exponent(self):
        d = holder_bump()
        assert d.alpha == 0.5
        assert d.pdf(0.0) == pytest.approx(0.0)


class TestRaisedCosine:
    def test_peak_value(self):
        d = raised_cosine()
        s = d.half_width / math.pi
        assert d.pdf(0.0) == pytest.approx(1.0 / (math.pi * s))

    def test_numeric_moments(self):
        moments = raised_cosine().exact_moments(2)
        assert moments[2] == pytest.approx(1.0, rel=1e-6)
        assert isinstance(moments[4], float)
