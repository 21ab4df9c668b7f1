"""The three single-site potential variants."""

from __future__ import annotations

import itertools
import logging
import math
from functools import cached_property

import numpy as np

from ..core.errors import PreconditionError
from ..core.lattice import Site
from .base import SingleSitePotential

logger = logging.getLogger(__name__)

TRUNCATION_FLOOR = 1e-12
E1 = Site(1, 0, 0)


class OverlappingPotential(SingleSitePotential):
    """Exponentially decaying u, |u(x)| <= C e^{-A|x|}, truncated where C e^{-A r} < 1e-12."""

    def __init__(self, values: dict[Site, float], decay_c: float, decay_a: float, truncation_radius: float):
        self._values = {s: float(v) for s, v in values.items() if v != 0.0}
        self.decay_c = float(decay_c)
        self.decay_a = float(decay_a)
        self.truncation_radius = float(truncation_radius)
        for s, v in self._values.items():
            envelope = self.decay_c * math.exp(-self.decay_a * s.euclidean_norm())
            if abs(v) > envelope * (1 + 1e-12):
                raise PreconditionError(f"|u({s})| = {abs(v):.3e} exceeds C e^(-A|x|) = {envelope:.3e}")
            if s.euclidean_norm() >= self.truncation_radius and s != Site.origin():
                raise PreconditionError(f"u({s}) stored beyond truncation radius {self.truncation_radius}")

    @property
    def variant(self) -> str:
        return "overlapping"

    def support(self) -> dict[Site, float]:
        return self._values

    @classmethod
    def delta(cls) -> OverlappingPotential:
        """Kronecker delta u(x) = delta_{x,0}: the Anderson model."""
        return cls({Site.origin(): 1.0}, decay_c=1.0, decay_a=1.0, truncation_radius=1.0)

    @classmethod
    def exponential(cls, decay_c: float, decay_a: float, alternating: bool = True) -> OverlappingPotential:
        """u(x) = C e^{-A|x|}, with sign (-1)^{|x|_1} when alternating."""
        if decay_a <= 0 or decay_c <= 0:
            raise PreconditionError("decay constants must be positive")
        r = math.log(decay_c / TRUNCATION_FLOOR) / decay_a
        r = max(r, 1.0)
        rr = int(math.ceil(r))
        values = {}
        for c in itertools.product(range(-rr, rr + 1), repeat=3):
            s = Site.of(c)
            dist = s.euclidean_norm()
            if dist >= r:
                continue
            sign = (-1) ** s.l1_norm() if alternating else 1
            values[s] = sign * decay_c * math.exp(-decay_a * dist)
        logger.debug("exponential potential: C=%g A=%g truncation r=%.3f, %d sites", decay_c, decay_a, r, len(values))
        return cls(values, decay_c, decay_a, r)


class DipolePotential(SingleSitePotential):
    """u_d(0) = 1, u_d(e1) = -1."""

    @property
    def variant(self) -> str:
        return "dipole"

    def support(self) -> dict[Site, float]:
        return {Site.origin(): 1.0, E1: -1.0}

    def u_hat(self, p) -> complex:
        return complex(1.0 - np.exp(-2j * np.pi * p.components[0]))

    def u_hat_sup(self, points: int | None = None) -> float:
        """sum_n |u(n)|, attained by |1 - e^{-i 2pi p_1}| at p_1 = 1/2."""
        return float(sum(abs(v) for v in self.support().values()))


class NonOverlappingPotential(SingleSitePotential):
    """Compactly supported u on Theta inside a primitive cell of the lattice kZ^3.

    The cell is an ordered site list x_1..x_n; translates of the cell by kZ^3
    tile Z^3 and the translates of Theta are pairwise disjoint.
    """

    def __init__(self, values: dict[Site, float], period: tuple[int, int, int], cell: list[Site]):
        self._values = {s: float(v) for s, v in values.items() if v != 0.0}
        self._period = tuple(int(k) for k in period)
        self.cell = list(cell)
        if any(k < 1 for k in self._period):
            raise PreconditionError(f"period must be positive, got {self._period}")
        if len(self.cell) != len(set(self.cell)):
            raise PreconditionError("cell sites must be distinct")
        missing = [s for s in self._values if s not in self.cell]
        if missing:
            raise PreconditionError(f"support sites {missing} lie outside the primitive cell")
        self._check_tiling()
        self._check_disjoint_translates()
        self._residue_index = {self._residue(s): i for i, s in enumerate(self.cell)}

    @property
    def variant(self) -> str:
        return "nonoverlapping"

    @property
    def period(self) -> tuple[int, int, int]:
        return self._period

    def support(self) -> dict[Site, float]:
        return self._values

    @property
    def n(self) -> int:
        return len(self.cell)

    @cached_property
    def diameter(self) -> int:
        """Graph (l1) diameter of the primitive cell."""
        return max((a - b).l1_norm() for a in self.cell for b in self.cell)

    def d_matrix(self) -> np.ndarray:
        """Diagonal D with D_ii = u(x_i)."""
        return np.diag([self.value(s) for s in self.cell])

    def _residue(self, s: Site) -> tuple[int, int, int]:
        return tuple(c % k for c, k in zip(s.coords, self._period))

    def _check_tiling(self):
        volume = math.prod(self._period)
        residues = {self._residue(s) for s in self.cell}
        if len(self.cell) != volume or len(residues) != volume:
            raise PreconditionError(
                f"cell of {len(self.cell)} sites does not tile Z^3 under period {self._period}"
            )

    def _check_disjoint_translates(self):
        theta = set(self._values)
        if not theta:
            return
        reach = 2 * max(1, max((a - b).sup_norm() for a in self.cell for b in self.cell))
        ranges = [range(-(reach // k) - 1, reach // k + 2) for k in self._period]
        for l in itertools.product(*ranges):
            if l == (0, 0, 0):
                continue
            shift = Site.of(l).scale(self._period)
            if any((s + shift) in theta for s in theta):
                raise PreconditionError(f"translates of Theta overlap under shift {shift}")

    def decompose(self, site: Site) -> tuple[int, Site]:
        """(i, t) with site = x_i + t, t in kZ^3."""
        i = self._residue_index[self._residue(site)]
        return i, site - self.cell[i]

    @classmethod
    def single_site(cls) -> NonOverlappingPotential:
        """n = 1 cell {0}, u(0) = 1, k = (1,1,1): the delta potential in cell form."""
        return cls({Site.origin(): 1.0}, (1, 1, 1), [Site.origin()])

    @classmethod
    def dipole_cell(cls) -> NonOverlappingPotential:
        """Dipole inside a two-site cell, k = (2,1,1), cell {0, e1}."""
        return cls({Site.origin(): 1.0, E1: -1.0}, (2, 1, 1), [Site.origin(), E1])
