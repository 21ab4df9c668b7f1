"""Abstract base class for single-site potentials."""

from abc import ABC, abstractmethod
from functools import cached_property

import numpy as np

from ..core.errors import UnsupportedVariantError
from ..core.lattice import DIM, Momentum, Site


class SingleSitePotential(ABC):
    """Profile u of the alloy potential V(x) = sum_i omega_i u(x - i)."""

    @property
    @abstractmethod
    def variant(self) -> str:
        """Variant tag: "overlapping", "nonoverlapping" or "dipole"."""

    @abstractmethod
    def support(self) -> dict[Site, float]:
        """Stored nonzero values of u (the truncated support)."""

    @property
    def period(self) -> tuple[int, int, int]:
        """Period vector k; couplings live on kZ^3."""
        return (1, 1, 1)

    @cached_property
    def radius(self) -> int:
        """Smallest R with supp u inside the sup-norm ball of radius R."""
        return max((s.sup_norm() for s in self.support()), default=0)

    def value(self, site: Site) -> float:
        return self.support().get(site, 0.0)

    def sup_norm(self) -> float:
        return max((abs(v) for v in self.support().values()), default=0.0)

    def dense(self) -> np.ndarray:
        """u on the (2R+1)^3 cube centred at the origin."""
        r = self.radius
        cube = np.zeros((2 * r + 1,) * DIM)
        for s, v in self.support().items():
            cube[s.x + r, s.y + r, s.z + r] = v
        return cube

    def u_hat(self, p: Momentum) -> complex:
        """sum_n e^{-i 2pi p.n} u(n)."""
        if self.variant == "nonoverlapping":
            raise UnsupportedVariantError("u_hat is not defined for non-overlapping potentials; use the cell matrix D")
        return complex(sum(v * np.exp(-2j * np.pi * p.dot(n)) for n, v in self.support().items()))

    def u_hat_sup(self, points: int | None = None) -> float:
        """sup_p |u_hat(p)| on an unshifted FFT grid (contains p = 0 and p = 1/2)."""
        if self.variant == "nonoverlapping":
            raise UnsupportedVariantError("u_hat is not defined for non-overlapping potentials")
        m = points or max(64, 4 * (self.radius + 1))
        m += m % 2
        buf = np.zeros((m,) * DIM)
        for s, v in self.support().items():
            buf[s.x % m, s.y % m, s.z % m] += v
        return float(np.abs(np.fft.fftn(buf)).max())

    def __repr__(self) -> str:
        return f"{type(self).__name__}(n_support={len(self.support())}, radius={self.radius})"
