"""Free and renormalized lattice Green functions, envelopes and decay fits."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ..core.errors import DomainError, OutOfResolventSetError, PreconditionError
from ..core.lattice import Site, TorusGrid, neighbour_sum_factor, offsets_within, unit_vectors
from ..core.models import DecayFit
from .selfenergy import (
    BlochFiber,
    DipoleSelfEnergy,
    MatrixSelfEnergy,
    ScalarSelfEnergy,
    check_denominator,
    threshold_dipole,
    threshold_nonoverlapping,
)

logger = logging.getLogger(__name__)

PARITY_TOL = 1e-10
ENVELOPE_ALPHA = 9.0  # alpha = 3d in d = 3
DOMINATION_SLACK = 1e-9


@dataclass
class GreenTable:
    """Values G(0, w) for a set of offsets w."""

    energy: float
    epsilon: float
    grid_points: int
    values: dict[Site, complex] = field(default_factory=dict)

    def __getitem__(self, w: Site) -> complex:
        return self.values[w]

    def real(self, w: Site) -> float:
        return float(np.real(self.values[w]))

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        return all(abs(v - self.values[-w]) <= tol * max(1.0, abs(v)) for w, v in self.values.items() if -w in self.values)

    def to_csv_rows(self) -> list[list]:
        return [[w.x, w.y, w.z, float(np.real(v)), float(np.imag(v))] for w, v in sorted(self.values.items())]

    @staticmethod
    def csv_header() -> list:
        return ["w1", "w2", "w3", "re", "im"]


def free_green_table(energy: float, offsets: list[Site], grid: TorusGrid) -> GreenTable:
    """G_E(0, w) = int e^{i 2pi w.q} / (e(q) - E) dq for every offset, one FFT."""
    if energy >= 0:
        raise OutOfResolventSetError(f"free Green function needs E < 0, got {energy}")
    values = grid.fourier_coefficients(1.0 / (grid.dispersion() - energy), offsets)
    worst_imag = float(np.abs(values.imag).max()) if len(values) else 0.0
    if worst_imag > PARITY_TOL:
        raise DomainError(f"free Green function has imaginary part {worst_imag:.2e}; parity broken")
    table = GreenTable(energy, 0.0, grid.points, {w: complex(v.real) for w, v in zip(offsets, values)})
    logger.debug("free Green table E=%g: %d offsets on M=%d", energy, len(offsets), grid.points)
    return table


def free_green(energy: float, w: Site, grid: TorusGrid) -> float:
    value = free_green_table(energy, [w], grid).real(w)
    if value <= 0:
        raise DomainError(f"free Green function not positive at {w}: {value}")
    return value


def defining_relation_residual(energy: float, radius: int, grid: TorusGrid) -> float:
    """max_w |(3 - E) G(w) - 1/2 sum_e G(w + e) - delta_{w,0}| over |w|_inf <= radius."""
    table = free_green_table(energy, offsets_within(radius + 1), grid)
    worst = 0.0
    for w in offsets_within(radius):
        lhs = (3.0 - energy) * table.real(w) - 0.5 * sum(table.real(w + e) for e in unit_vectors())
        worst = max(worst, abs(lhs - (1.0 if w == Site.origin() else 0.0)))
    return worst


def ratio_bound_check(energy: float, w: Site, e: Site, grid: TorusGrid) -> bool:
    """1/(6 - 2E) < G(0, w) / G(0, w + e) < 6 - 2E."""
    if w == Site.origin():
        raise PreconditionError("the ratio identity excludes w = 0")
    if e.l1_norm() != 1:
        raise PreconditionError(f"{e} is not a unit vector")
    table = free_green_table(energy, [w, w + e], grid)
    ratio = table.real(w) / table.real(w + e)
    bound = neighbour_sum_factor(energy)
    return 1.0 / bound < ratio < bound


def ratio_bound_violations(energy: float, radius: int, grid: TorusGrid) -> list[tuple[Site, Site, float]]:
    """Every (w, e, ratio) with 0 < |w|_inf <= radius breaking the ratio bound; one FFT."""
    table = free_green_table(energy, offsets_within(radius + 1), grid)
    bound = neighbour_sum_factor(energy)
    bad = []
    for w in offsets_within(radius):
        if w == Site.origin():
            continue
        for e in unit_vectors():
            ratio = table.real(w) / table.real(w + e)
            if not 1.0 / bound < ratio < bound:
                bad.append((w, e, ratio))
    return bad


def psi_envelope(alpha: float, energy: float, r: float, d: int = 3) -> float:
    """psi_alpha(r) = e^{-r sqrt(-E)/alpha} max((-E)^{(d-2)/2}, (1+r)^{2-d})."""
    if d < 3:
        raise PreconditionError("the envelope is defined for d >= 3")
    return math.exp(-r * math.sqrt(-energy) / alpha) * max((-energy) ** ((d - 2) / 2.0), (1.0 + r) ** (2 - d))


@dataclass
class EnvelopeCheck:
    energy: float
    radius: int
    c_fit: float
    worst_ratio: float
    worst_by_radius: dict[int, float]
    min_value: float

    def stable(self, r_a: int, r_b: int, rel: float = 0.1) -> bool:
        a, b = self.worst_by_radius[r_a], self.worst_by_radius[r_b]
        return abs(b - a) <= rel * abs(a)


def envelope_check(energy: float, radius: int, grid: TorusGrid, alpha: float = ENVELOPE_ALPHA) -> EnvelopeCheck:
    """sup_{|w| <= radius} G_E(0, w) / psi_alpha(|w|) and its history in the radius."""
    if energy >= 0:
        raise OutOfResolventSetError(f"envelope check needs E < 0, got {energy}")
    table = free_green_table(energy, offsets_within(radius), grid)
    worst_by_radius = {}
    running = 0.0
    for r in range(radius + 1):
        shell = [w for w in table.values if w.sup_norm() == r]
        for w in shell:
            running = max(running, table.real(w) / psi_envelope(alpha, energy, w.euclidean_norm()))
        worst_by_radius[r] = running
    min_value = min(table.real(w) for w in table.values)
    if not math.isfinite(running):
        raise DomainError("envelope ratio is not finite")
    return EnvelopeCheck(energy, radius, running, running, worst_by_radius, min_value)


def renormalized_green(
    energy: float,
    epsilon: float,
    sigma: ScalarSelfEnergy | DipoleSelfEnergy | MatrixSelfEnergy,
    w: Site,
    grid: TorusGrid,
    source: Site | None = None,
) -> complex:
    """R_r(source + w, source) for the renormalized propagator (-Delta/2 - Sigma - E - i eps)^{-1}.

    Translation invariant in the scalar cases, cell periodic in the matrix case.
    """
    if isinstance(sigma, MatrixSelfEnergy):
        origin = source or Site.origin()
        fiber = BlochFiber(sigma.potential, grid)
        return fiber.kernel(sigma.sigma, energy, epsilon, origin + w, origin)
    den = grid.dispersion() - energy - 1j * epsilon - sigma.on_grid(grid)
    check_denominator(den, grid)
    return complex(grid.fourier_coefficients(1.0 / den, [w])[0])


def renormalized_green_table(
    energy: float,
    epsilon: float,
    sigma: ScalarSelfEnergy | DipoleSelfEnergy | MatrixSelfEnergy,
    offsets: list[Site],
    grid: TorusGrid,
    source: Site | None = None,
) -> GreenTable:
    if isinstance(sigma, MatrixSelfEnergy):
        origin = source or Site.origin()
        fiber = BlochFiber(sigma.potential, grid)
        inv = fiber.inverses(sigma.sigma, energy, epsilon)
        i, t0 = sigma.potential.decompose(origin)
        values = {}
        for w in offsets:
            j, t = sigma.potential.decompose(origin + w)
            phase = np.exp(2j * np.pi * (fiber.thetas @ np.array((t - t0).coords, dtype=float)))
            values[w] = complex(np.mean(inv[:, j, i] * phase))
        return GreenTable(energy, epsilon, grid.points, values)
    den = grid.dispersion() - energy - 1j * epsilon - sigma.on_grid(grid)
    check_denominator(den, grid)
    vals = grid.fourier_coefficients(1.0 / den, offsets)
    return GreenTable(energy, epsilon, grid.points, dict(zip(offsets, (complex(v) for v in vals))))


@dataclass
class DominationCheck:
    """Worst excess of |R_r(x + w, x)| over G_{E - E0/2}(0, w) on a ball of offsets."""

    energy: float
    threshold: float
    radius: int
    max_excess: float
    worst_source: Site
    worst_offset: Site

    @property
    def shifted_energy(self) -> float:
        return self.energy - self.threshold / 2.0

    @property
    def holds(self) -> bool:
        return self.max_excess <= DOMINATION_SLACK


def propsigma_domination_check(
    sigma: MatrixSelfEnergy, grid: TorusGrid, radius: int = 4, threshold: float | None = None
) -> DominationCheck:
    """max over cell sites x and |w|_inf <= radius of |R_r(x + w, x)| - G_{E - E0/2}(0, w).

    Non-positive when the non-overlapping renormalized propagator is dominated by
    the free Green function at the shifted energy. E0 defaults to the
    non-overlapping threshold evaluated at the solved energy.
    """
    if threshold is None:
        threshold = threshold_nonoverlapping(sigma.coupling, sigma.potential, sigma.energy)
    if not sigma.energy < threshold:
        raise PreconditionError(f"E={sigma.energy} is not below the threshold {threshold:.6g}")
    offsets = offsets_within(radius)
    free = free_green_table(sigma.energy - threshold / 2.0, offsets, grid)
    worst, worst_source, worst_offset = -math.inf, Site.origin(), Site.origin()
    for x in sigma.potential.cell:
        table = renormalized_green_table(sigma.energy, sigma.epsilon, sigma, offsets, grid, source=x)
        for w in offsets:
            excess = abs(table[w]) - free.real(w)
            if excess > worst:
                worst, worst_source, worst_offset = excess, x, w
    logger.info("domination check E=%g: max excess %.3e at %s + %s", sigma.energy, worst, worst_source, worst_offset)
    return DominationCheck(sigma.energy, threshold, radius, worst, worst_source, worst_offset)


def decay_fit(values: dict[Site, float], r_min: float = 2.0, r_max: float = math.inf) -> DecayFit:
    """Fit log(value) against Euclidean |w| on r_min <= |w| <= r_max."""
    pts = [(w.euclidean_norm(), v) for w, v in values.items() if r_min <= w.euclidean_norm() <= r_max]
    return decay_fit_series([r for r, _ in pts], [v for _, v in pts])


def decay_fit_series(distances, values, min_points: int = 5) -> DecayFit:
    """Least-squares line through (r, log value); rate is minus the slope."""
    r = np.asarray(distances, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(r) < min_points:
        raise PreconditionError(f"decay fit needs at least {min_points} points, got {len(r)}")
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise DomainError("decay fit needs positive finite values")
    logv = np.log(v)
    if np.ptp(logv) == 0.0:
        return DecayFit(0.0, float(v[0]), 0.0, float(r.min()), float(r.max()), len(r), 0.0)
    fit = stats.linregress(r, logv)
    resid = logv - (fit.intercept + fit.slope * r)
    return DecayFit(
        rate=float(-fit.slope) + 0.0,
        prefactor=float(math.exp(fit.intercept)),
        residual=float(np.sqrt(np.mean(resid**2))),
        r_min=float(r.min()),
        r_max=float(r.max()),
        points=len(r),
        rate_stderr=float(fit.stderr),
    )


def predicted_decay_rate(variant: str, coupling: float, energy: float, threshold: float, nu: float) -> float:
    """Decay-rate scale delta at E below the threshold, with E* = lambda^{4-nu}/2.

    overlapping: sqrt(E0 - E - E*)/(sqrt 6 pi); nonoverlapping: sqrt(E*_N/3)
    with E*_N = -E + E0/2; dipole: sqrt((E_d - E - E*)/2).
    """
    e_star = coupling ** (4.0 - nu) / 2.0
    if variant == "overlapping":
        gap = threshold - energy - e_star
        return math.sqrt(gap) / (math.sqrt(6.0) * math.pi) if gap > 0 else 0.0
    if variant == "nonoverlapping":
        e_star_n = -energy + threshold / 2.0
        return math.sqrt(e_star_n / 3.0) if e_star_n > 0 else 0.0
    if variant == "dipole":
        gap = threshold_dipole(coupling) - energy - e_star
        return math.sqrt(gap / 2.0) if gap > 0 else 0.0
    raise PreconditionError(f"unknown variant {variant!r}")
