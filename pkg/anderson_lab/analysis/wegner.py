"""Eigenvalue counting: the Weyl interval lemma, Lipschitz approximation, Monte Carlo Wegner shape."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, linalg, stats

from ..core.errors import NotPositiveDefiniteError, PreconditionError
from ..core.lattice import Box
from ..core.models import WegnerRow
from ..disorder.base import SingleSitePotential
from ..disorder.densities import DisorderDensity
from ..disorder.sampling import sample_disorder, sample_seed
from .hamiltonian import SpectralWindow, build, count_in_window, eigenvalues

logger = logging.getLogger(__name__)

WEYL_TOL = 1e-9
LIPSCHITZ_GRID_POINTS = 400_001


@dataclass
class HermitianPair:
    """Hermitian A and positive definite B with alpha = lambda_min(B), beta = lambda_max(B)."""

    a: np.ndarray
    b: np.ndarray
    alpha: float = field(init=False)
    beta: float = field(init=False)

    def __post_init__(self):
        self.a = np.asarray(self.a)
        self.b = np.asarray(self.b)
        if self.a.shape != self.b.shape or self.a.shape[0] != self.a.shape[1]:
            raise PreconditionError(f"A {self.a.shape} and B {self.b.shape} must be square of equal size")
        spectrum = linalg.eigvalsh(self.b)
        self.alpha = float(spectrum[0])
        self.beta = float(spectrum[-1])
        if self.alpha <= 0:
            raise NotPositiveDefiniteError(f"B has smallest eigenvalue {self.alpha:.3g}")

    @property
    def dimension(self) -> int:
        return self.a.shape[0]

    def crossings(self, level: float) -> np.ndarray:
        """All x with level in spec(A + x B).

        Each lambda_k(A + x B) increases strictly in x, so they are exactly the
        generalized eigenvalues of (level - A) v = x B v, one per k.
        """
        return linalg.eigh(level * np.eye(self.dimension) - self.a, self.b, eigvals_only=True)


@dataclass
class IntervalBound:
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + WEYL_TOL


def _integrated_count_below(pair: HermitianPair, level: float, c: float, d: float) -> float:
    # #{k: lambda_k(A + x B) < level} = #{crossings > x}
    return float(np.clip(pair.crossings(level) - c, 0.0, d - c).sum())


def weyl_interval_bound(pair: HermitianPair, interval: tuple[float, float], x_range: tuple[float, float]) -> IntervalBound:
    """int_J tr P_I(A + x B) dx against |I| tr P_{I^}(A) / alpha, I^ = [a - beta d, b - alpha c].

    I = [a, b) is half open; the left side is integrated exactly from the crossings.
    """
    a, b = interval
    c, d = x_range
    if c < 0 or d < c:
        raise PreconditionError(f"J=[{c}, {d}] must be a subinterval of [0, inf)")
    if b < a:
        raise PreconditionError(f"I=[{a}, {b}] is empty")
    lhs = _integrated_count_below(pair, b, c, d) - _integrated_count_below(pair, a, c, d)
    spec_a = linalg.eigvalsh(pair.a)
    lo, hi = a - pair.beta * d, b - pair.alpha * c
    count = int(np.count_nonzero((spec_a >= lo) & (spec_a <= hi)))
    rhs = (b - a) * count / pair.alpha
    return IntervalBound(lhs, rhs)


def weyl_sandwich(c: np.ndarray, d: np.ndarray) -> float:
    """Largest violation of lambda_k(C) + lambda_1(D) <= lambda_k(C + D) <= lambda_k(C) + lambda_n(D)."""
    lc = linalg.eigvalsh(c)
    ld = linalg.eigvalsh(d)
    lcd = linalg.eigvalsh(c + d)
    low = lc + ld[0] - lcd
    high = lcd - lc - ld[-1]
    return float(max(low.max(), high.max(), 0.0))


def random_hermitian(rng: np.random.Generator, dim: int) -> np.ndarray:
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (m + m.conj().T) / 2.0


def random_pair(rng: np.random.Generator, dim: int, b_spectrum: tuple[float, float] = (0.5, 2.0)) -> HermitianPair:
    """Random A and B = U diag(s) U* with s drawn in ``b_spectrum``."""
    q, _ = np.linalg.qr(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))
    s = rng.uniform(*b_spectrum, size=dim)
    return HermitianPair(random_hermitian(rng, dim), (q * s) @ q.conj().T)


@dataclass
class LipschitzApproximation:
    """rho_K(x) = min_y (rho(y) + K |x - y|) on a grid of J."""

    grid: np.ndarray
    values: np.ndarray
    k: float
    alpha: float
    sup_error: float
    l1_norm: float

    def __call__(self, x):
        return np.interp(x, self.grid, self.values, left=0.0, right=0.0)

    @property
    def error_constant(self) -> float:
        """C in sup|rho - rho_K| <= C K^{-alpha/(1-alpha)}."""
        if self.alpha >= 1.0:
            return 0.0
        return self.sup_error * self.k ** (self.alpha / (1.0 - self.alpha))

    @property
    def l1_bound(self) -> float:
        width = self.grid[-1] - self.grid[0]
        if self.alpha >= 1.0:
            return 1.0
        return 1.0 + self.error_constant * self.k ** (-self.alpha / (1.0 - self.alpha)) * width

    def lipschitz_constant(self) -> float:
        """Largest difference quotient between neighbouring grid points."""
        return float(np.max(np.abs(np.diff(self.values)) / np.diff(self.grid)))


def lipschitz_approx(density: DisorderDensity, k: float, points: int = LIPSCHITZ_GRID_POINTS) -> LipschitzApproximation:
    if k <= 0:
        raise PreconditionError(f"Lipschitz constant must be positive, got {k}")
    lo, hi = density.support
    x = np.linspace(lo, hi, points)
    rho = density.pdf(x)
    if density.alpha >= 1.0:
        return LipschitzApproximation(x, rho, k, density.alpha, 0.0, float(integrate.trapezoid(rho, x)))
    forward = k * x + np.minimum.accumulate(rho - k * x)
    backward = -k * x + np.minimum.accumulate((rho + k * x)[::-1])[::-1]
    approx = np.minimum(forward, backward)
    sup_error = float(np.max(rho - approx))
    l1 = float(integrate.trapezoid(approx, x))
    logger.debug("Lipschitz approximation K=%g: sup error %.3e", k, sup_error)
    return LipschitzApproximation(x, approx, k, density.alpha, sup_error, l1)


def lipschitz_error_exponent(density: DisorderDensity, ks: list[float]) -> float:
    """Fitted exponent of sup|rho - rho_K| against K (log-log slope)."""
    errors = [lipschitz_approx(density, k).sup_error for k in ks]
    fit = stats.linregress(np.log(ks), np.log(errors))
    return float(fit.slope)


@dataclass
class WegnerResult:
    rows: list[WegnerRow]
    slope: float
    slope_stderr: float
    samples: int
    volume: int
    counts: np.ndarray  # (samples, widths), kept for monotonicity checks

    def linearity_ratio(self) -> tuple[float, float]:
        """estimate(2w) / estimate(w) for the first two widths, with a delta-method stderr.

        (nan, nan) when either estimate is zero: no eigenvalue was seen in the
        window, so the count carries no linearity information.
        """
        first, second = self.rows[0], self.rows[1]
        if first.estimate == 0.0 or second.estimate == 0.0:
            return math.nan, math.nan
        ratio = second.estimate / first.estimate
        rel = math.hypot(second.stderr / second.estimate, first.stderr / first.estimate)
        return ratio, ratio * rel


def mc_wegner(
    box: Box,
    coupling: float,
    potential: SingleSitePotential,
    density: DisorderDensity,
    center: float,
    widths: list[float],
    samples: int,
    seed: int,
    workers: int = 1,
) -> WegnerResult:
    """Monte Carlo E tr P_I for windows of common center and the given widths."""
    widths = sorted(widths)
    windows = [SpectralWindow.centered(center, w) for w in widths]
    for window in windows:
        if window.distance_to_band == 0.0:
            raise PreconditionError(f"window [{window.lower}, {window.upper}) touches the free spectrum [0, 6]")

    def one(index: int) -> list[int]:
        sample = sample_disorder(density, box, potential.period, sample_seed(seed, index), potential)
        evals = eigenvalues(build(box, coupling, potential, sample))
        return [count_in_window(evals, w) for w in windows]

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        counts = np.array(list(pool.map(one, range(samples))), dtype=int)

    volume = box.cardinality
    exponent = (1.0 + density.alpha) / density.alpha
    rows = []
    for k, (w, window) in enumerate(zip(widths, windows)):
        col = counts[:, k]
        est = float(col.mean())
        stderr = float(col.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
        shape = w * volume**exponent / window.distance_to_band
        rows.append(WegnerRow(w, window.lower, window.upper, window.distance_to_band, est, stderr, est / shape))

    if len(widths) > 1:
        fit = stats.linregress(widths, [r.estimate for r in rows])
        slope, slope_stderr = float(fit.slope), float(fit.stderr)
    else:
        slope, slope_stderr = rows[0].estimate / widths[0], rows[0].stderr / widths[0]
    logger.info("Wegner MC on %s: %d samples, slope %.4g", box, samples, slope)
    return WegnerResult(rows, slope, slope_stderr, samples, volume, counts)
