"""Disorder densities: even, compactly supported, unit variance, Holder continuous."""

from __future__ import annotations

import logging
import math
from fractions import Fraction

import numpy as np
from scipy import special, stats

logger = logging.getLogger(__name__)

SQRT3 = math.sqrt(3.0)


class _HolderBumpGen(stats.rv_continuous):
    """rho(x) = (4/pi) sqrt(|x|(1-|x|)) on [-1, 1]: Holder-1/2 at 0 and at +-1."""

    def _pdf(self, x):
        ax = np.abs(x)
        return (4.0 / np.pi) * np.sqrt(np.clip(ax * (1.0 - ax), 0.0, None))

    def _cdf(self, x):
        return 0.5 + 0.5 * np.sign(x) * special.betainc(1.5, 1.5, np.abs(x))

    def _ppf(self, q):
        upper = special.betaincinv(1.5, 1.5, np.clip(2.0 * q - 1.0, 0.0, 1.0))
        lower = -special.betaincinv(1.5, 1.5, np.clip(1.0 - 2.0 * q, 0.0, 1.0))
        return np.where(q >= 0.5, upper, lower)


_holder_bump = _HolderBumpGen(a=-1.0, b=1.0, name="holder_bump")


class DisorderDensity:
    """Law of the couplings omega_i, wrapping a frozen scipy.stats distribution.

    ``half_width`` is the half-length of the support J = [-half_width, half_width];
    ``alpha`` and ``holder_k`` certify |rho(x) - rho(y)| <= K |x - y|^alpha on J.
    """

    def __init__(self, name: str, dist, half_width: float, alpha: float, holder_k: float):
        if not 0.0 < alpha <= 1.0:
            raise ValueError(f"Holder exponent must lie in (0, 1], got {alpha}")
        self.name = name
        self.dist = dist
        self.half_width = float(half_width)
        self.alpha = float(alpha)
        self.holder_k = float(holder_k)

    @property
    def support(self) -> tuple[float, float]:
        return (-self.half_width, self.half_width)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = np.abs(x) <= self.half_width
        return np.where(inside, self.dist.pdf(np.clip(x, -self.half_width, self.half_width)), 0.0)

    def cdf(self, x):
        return self.dist.cdf(x)

    def ppf(self, u):
        return self.dist.ppf(u)

    def moment(self, order: int) -> float:
        if order % 2:
            return 0.0
        return float(self.dist.moment(order))

    def exact_moments(self, l_max: int) -> dict[int, Fraction | float]:
        """Even moments m_2 .. m_{2 l_max}; rational where a closed form exists."""
        if self.name == "uniform":
            return {2 * l: Fraction(3**l, 2 * l + 1) for l in range(1, l_max + 1)}
        return {2 * l: self.moment(2 * l) for l in range(1, l_max + 1)}

    def holder_certificate(self, pairs: int = 10_000, seed: int = 0) -> tuple[bool, float]:
        """Check |rho(x) - rho(y)| <= K |x-y|^alpha on random pairs of J.

        Returns (holds, worst ratio |rho(x)-rho(y)| / (K |x-y|^alpha)).
        """
        rng = np.random.default_rng(seed)
        x = rng.uniform(-self.half_width, self.half_width, pairs)
        y = rng.uniform(-self.half_width, self.half_width, pairs)
        gap = np.abs(x - y) ** self.alpha
        diff = np.abs(self.pdf(x) - self.pdf(y))
        if self.holder_k == 0.0:
            worst = float(diff.max())
            return worst <= 1e-12, worst
        ratio = diff / (self.holder_k * np.maximum(gap, 1e-300))
        worst = float(ratio.max())
        return worst <= 1.0 + 1e-9, worst

    def __repr__(self) -> str:
        return f"DisorderDensity({self.name}, J=[-{self.half_width:.4f}, {self.half_width:.4f}], alpha={self.alpha})"


def uniform() -> DisorderDensity:
    """Uniform law on [-sqrt 3, sqrt 3]; constant on J so K = 0 there."""
    return DisorderDensity("uniform", stats.uniform(loc=-SQRT3, scale=2 * SQRT3), SQRT3, alpha=1.0, holder_k=0.0)


def raised_cosine() -> DisorderDensity:
    """(1 + cos(x/s)) / (2 pi s) on [-pi s, pi s], s chosen for unit variance."""
    s = 1.0 / math.sqrt(math.pi**2 / 3.0 - 2.0)
    return DisorderDensity(
        "raised_cosine",
        stats.cosine(scale=s),
        math.pi * s,
        alpha=1.0,
        holder_k=1.0 / (2.0 * math.pi * s * s),
    )


def holder_bump() -> DisorderDensity:
    """Holder-1/2 density (4/(pi s)) sqrt(|x/s|(1-|x/s|)), unit variance at s = 4/sqrt 5."""
    s = 4.0 / math.sqrt(5.0)
    return DisorderDensity(
        "holder_bump",
        _holder_bump(scale=s),
        s,
        alpha=0.5,
        holder_k=(4.0 / math.pi) * s**-1.5,
    )


DENSITY_PRESETS = {
    "uniform": uniform,
    "raised_cosine": raised_cosine,
    "holder_bump": holder_bump,
}


def density_from_name(name: str) -> DisorderDensity:
    try:
        return DENSITY_PRESETS[name]()
    except KeyError:
        raise ValueError(f"unknown density preset {name!r}; choose from {sorted(DENSITY_PRESETS)}") from None
