"""Single-site potentials, disorder densities and counter-based sampling."""

from .base import SingleSitePotential
from .densities import DisorderDensity, density_from_name
from .potentials import DipolePotential, NonOverlappingPotential, OverlappingPotential
from .sampling import DisorderSample, alloy_field, sample_disorder

__all__ = [
    "SingleSitePotential",
    "OverlappingPotential",
    "DipolePotential",
    "NonOverlappingPotential",
    "DisorderDensity",
    "density_from_name",
    "DisorderSample",
    "sample_disorder",
    "alloy_field",
]
