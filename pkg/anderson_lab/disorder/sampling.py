"""Counter-based disorder sampling and evaluation of the alloy potential."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..core.errors import IncompleteSampleError
from ..core.lattice import DIM, Box, Site
from .base import SingleSitePotential
from .densities import DisorderDensity

logger = logging.getLogger(__name__)

_COORD_BITS = 21
_COORD_OFFSET = 1 << (_COORD_BITS - 1)
_MASK64 = (1 << 64) - 1


def site_code(index: tuple[int, int, int]) -> int:
    """Pack a lattice index into 63 bits (|coordinate| < 2^20)."""
    code = 0
    for c in index:
        code = (code << _COORD_BITS) | (int(c) + _COORD_OFFSET)
    return code


def site_uniform(seed: int, index: tuple[int, int, int]) -> float:
    """U(0,1) draw keyed on (seed, site); independent of generation order."""
    key = ((int(seed) & _MASK64) << 64) | site_code(index)
    raw = int(np.random.Philox(key=key).random_raw())
    return ((raw >> 11) + 0.5) * 2.0**-53


def sample_seed(master_seed: int, sample_index: int) -> int:
    """Per-sample seed derived from the master seed."""
    state = np.random.SeedSequence([int(master_seed), int(sample_index)]).generate_state(1, np.uint64)
    return int(state[0])


@dataclass
class DisorderSample:
    """Couplings omega_l on lattice indices l (sites l*k of kZ^3) inside a box of indices."""

    period: tuple[int, int, int]
    lower: tuple[int, int, int]  # smallest lattice index stored
    values: np.ndarray  # shape (n1, n2, n3)
    present: np.ndarray  # boolean mask, same shape
    seed: int | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.present = np.asarray(self.present, dtype=bool)

    @classmethod
    def from_mapping(cls, mapping: dict[Site, float], period=(1, 1, 1), fill_box: Box | None = None) -> DisorderSample:
        """Build a sample from explicit lattice sites (multiples of the period).

        Sites of ``fill_box`` not in the mapping get omega = 0 and are present.
        """
        indices = [tuple(c // k for c, k in zip(s.coords, period)) for s in mapping]
        if fill_box is not None:
            lo_f, hi_f = _index_range(fill_box, period)
            indices += [lo_f, hi_f]
        arr = np.array(indices).reshape(-1, DIM)
        lo = arr.min(axis=0)
        hi = arr.max(axis=0)
        shape = tuple(hi - lo + 1)
        values = np.zeros(shape)
        present = np.zeros(shape, dtype=bool)
        if fill_box is not None:
            a = np.array(lo_f) - lo
            b = np.array(hi_f) - lo + 1
            present[a[0] : b[0], a[1] : b[1], a[2] : b[2]] = True
        for s, v in mapping.items():
            if any(c % k for c, k in zip(s.coords, period)):
                raise ValueError(f"site {s} is not on the lattice {period}Z^3")
            idx = tuple(c // k - l for c, k, l in zip(s.coords, period, lo))
            values[idx] = v
            present[idx] = True
        return cls(tuple(int(k) for k in period), tuple(int(v) for v in lo), values, present)

    def lookup(self, index: np.ndarray) -> np.ndarray:
        """omega at an (m, 3) array of lattice indices."""
        rel = np.asarray(index, dtype=np.int64) - np.array(self.lower)
        shape = np.array(self.values.shape)
        inside = np.all((rel >= 0) & (rel < shape), axis=1)
        if not np.all(inside):
            bad = np.asarray(index)[~inside][0]
            raise IncompleteSampleError(f"sample has no coupling at lattice index {tuple(int(v) for v in bad)}")
        ok = self.present[rel[:, 0], rel[:, 1], rel[:, 2]]
        if not np.all(ok):
            bad = np.asarray(index)[~ok][0]
            raise IncompleteSampleError(f"sample has no coupling at lattice index {tuple(int(v) for v in bad)}")
        return self.values[rel[:, 0], rel[:, 1], rel[:, 2]]

    def omega(self, site: Site) -> float:
        if any(c % k for c, k in zip(site.coords, self.period)):
            raise KeyError(f"{site} is not a coupling site")
        index = np.array([[c // k for c, k in zip(site.coords, self.period)]])
        return float(self.lookup(index)[0])


def _index_range(region: Box, period) -> tuple[tuple[int, ...], tuple[int, ...]]:
    lo = tuple(math.ceil((c - region.radius) / k) for c, k in zip(region.center.coords, period))
    hi = tuple(math.floor((c + region.radius) / k) for c, k in zip(region.center.coords, period))
    return lo, hi


def sample_disorder(
    density: DisorderDensity,
    region: Box,
    period: tuple[int, int, int] = (1, 1, 1),
    seed: int = 0,
    potential: SingleSitePotential | None = None,
) -> DisorderSample:
    """One i.i.d. draw per site of kZ^3 in the region.

    When ``potential`` is given the region grows by its support radius so every
    translate of u reaching the region is covered.
    """
    if potential is not None:
        region = region.grow(potential.radius)
    lo, hi = _index_range(region, period)
    shape = tuple(h - l + 1 for l, h in zip(lo, hi))
    uniforms = np.empty(shape)
    for rel in np.ndindex(*shape):
        uniforms[rel] = site_uniform(seed, tuple(l + r for l, r in zip(lo, rel)))
    values = np.asarray(density.ppf(uniforms), dtype=float)
    logger.debug("sampled %d couplings (seed=%d, density=%s)", values.size, seed, density.name)
    return DisorderSample(
        period=tuple(int(k) for k in period),
        lower=lo,
        values=values,
        present=np.ones(shape, dtype=bool),
        seed=seed,
        provenance={"density": density.name, "region": str(region)},
    )


def alloy_potential(sample: DisorderSample, u: SingleSitePotential, x: Site) -> float:
    """V(x) = sum_{i in kZ^3} omega_i u(x - i)."""
    k = u.period
    total = 0.0
    for n, value in u.support().items():
        i = x - n
        if any(c % kk for c, kk in zip(i.coords, k)):
            continue
        total += value * sample.omega(i)
    return total


def alloy_field(sample: DisorderSample, u: SingleSitePotential, box: Box) -> np.ndarray:
    """V on every site of the box, in box index order."""
    coords = box.coordinates()
    k = np.array(u.period)
    field_values = np.zeros(len(coords))
    for n, value in u.support().items():
        diff = coords - np.array(n.coords)
        on_lattice = np.all(diff % k == 0, axis=1)
        if not np.any(on_lattice):
            continue
        field_values[on_lattice] += value * sample.lookup(diff[on_lattice] // k)
    return field_values
