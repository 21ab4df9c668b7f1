"""Boundary resolvent decay on a ladder of boxes (initial-volume experiment)."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..core.errors import EigenvalueHitError, InadmissibleEnergyError, NonConvergenceError, PreconditionError
from ..core.lattice import Box, Site, boundary
from ..core.models import DecayFit, LocalizationRow
from ..disorder.base import SingleSitePotential
from ..disorder.densities import DisorderDensity
from ..disorder.potentials import NonOverlappingPotential
from ..disorder.sampling import DisorderSample, sample_disorder, sample_seed
from .green import decay_fit_series, predicted_decay_rate
from .hamiltonian import ResolventSolver, build
from .selfenergy import kappa, threshold_dipole, threshold_nonoverlapping, threshold_overlapping

logger = logging.getLogger(__name__)

SKIP_RATE_WARNING = 0.2
MIN_LADDER_POINTS = 3
IQR_TO_SIGMA = 1.349
MEDIAN_EFFICIENCY = 1.2533  # sqrt(pi/2)
ENERGY_TOL = 1e-13
ENERGY_MAX_ITER = 200


def variant_threshold(coupling: float, potential: SingleSitePotential, energy: float | None = None) -> float:
    """E_0 (overlapping), E_0 at ``energy`` (non-overlapping) or E_d (dipole)."""
    if potential.variant == "dipole":
        return threshold_dipole(coupling)
    if isinstance(potential, NonOverlappingPotential):
        if energy is None:
            raise PreconditionError("the non-overlapping threshold depends on E; pass the query energy")
        return threshold_nonoverlapping(coupling, potential, energy)
    return threshold_overlapping(coupling, potential.u_hat_sup())


def localization_energy(coupling: float, potential: SingleSitePotential, nu: float) -> float:
    """E = threshold - lambda^{4 - nu}.

    The non-overlapping threshold depends on E itself, so there E is the fixed
    point of E -> E_0(E) - lambda^{4 - nu}, reached from E = -kappa - lambda^{4 - nu}.
    """
    offset = coupling ** (4.0 - nu)
    if not isinstance(potential, NonOverlappingPotential):
        return variant_threshold(coupling, potential) - offset
    energy = -kappa(coupling, potential) - offset
    steps: list[float] = []
    for iteration in range(1, ENERGY_MAX_ITER + 1):
        updated = threshold_nonoverlapping(coupling, potential, energy) - offset
        step = abs(updated - energy)
        if steps and step > steps[-1]:
            raise NonConvergenceError(
                f"localization energy iteration diverges at lambda={coupling} (step {step:.3e})",
                [b / a for a, b in zip(steps, steps[1:]) if a > 0],
                step,
            )
        steps.append(step)
        energy = updated
        if step <= ENERGY_TOL * max(1.0, abs(energy)):
            logger.debug("localization energy %.10g after %d iterations", energy, iteration)
            return energy
    raise NonConvergenceError(
        f"localization energy did not settle in {ENERGY_MAX_ITER} iterations", residual=steps[-1]
    )


def check_localization_energy(coupling: float, potential: SingleSitePotential, energy: float, nu: float):
    threshold = variant_threshold(coupling, potential, energy)
    limit = threshold - coupling ** (4.0 - nu)
    if energy > limit + ENERGY_TOL * max(1.0, abs(limit)):
        raise InadmissibleEnergyError(
            f"E={energy} is above threshold - lambda^(4-nu) = {limit:.6g}", energy, threshold
        )


def boundary_maximum(h_solver: ResolventSolver, box: Box, source: Site) -> float:
    """max over w on the inner boundary of |R(E; source, w)|."""
    column = h_solver.column(source)
    idx = [box.index_of(w) for w in boundary(box)]
    return float(np.abs(column[idx]).max())


def boundary_value(
    box: Box, coupling: float, energy: float, potential: SingleSitePotential, sample: DisorderSample
) -> float:
    h = build(box, coupling, potential, sample)
    return boundary_maximum(ResolventSolver(h, energy, 0.0), box, box.center)


@dataclass
class LocalizationResult:
    rows: list[LocalizationRow]
    fit: DecayFit
    predicted_rate: float
    energy: float
    threshold: float

    @property
    def skip_flag(self) -> bool:
        return any(r.skip_rate > SKIP_RATE_WARNING for r in self.rows)

    @property
    def medians(self) -> list[float]:
        return [r.median for r in self.rows]

    def strictly_decreasing(self) -> bool:
        m = self.medians
        return all(b < a for a, b in zip(m, m[1:]))


def localization_ladder(
    radii: list[int],
    coupling: float,
    energy: float,
    potential: SingleSitePotential,
    density: DisorderDensity,
    samples: int,
    seed: int,
    nu: float = 0.5,
    workers: int = 1,
) -> LocalizationResult:
    """Median max_{w in boundary} |R_{Lambda_L}(E; 0, w)| over disorder, for each L.

    Sample k uses the same couplings on every box of the ladder; samples where E
    hits an eigenvalue are skipped and counted.
    """
    if len(radii) < MIN_LADDER_POINTS:
        raise PreconditionError(f"ladder needs at least {MIN_LADDER_POINTS} radii, got {len(radii)}")
    radii = sorted(radii)
    threshold = variant_threshold(coupling, potential, energy)
    random = coupling != 0.0
    draws = samples if random else 1

    def one(args: tuple[int, int]) -> float | None:
        radius, index = args
        box = Box(Site.origin(), radius)
        if random:
            sample = sample_disorder(density, box, potential.period, sample_seed(seed, index), potential)
        else:
            sample = DisorderSample.from_mapping({}, potential.period, fill_box=box.grow(potential.radius))
        try:
            return boundary_value(box, coupling, energy, potential, sample)
        except EigenvalueHitError:
            logger.warning("L=%d sample %d: E=%g is an eigenvalue, skipped", radius, index, energy)
            return None

    rows = []
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        for radius in radii:
            values = [v for v in pool.map(one, [(radius, k) for k in range(draws)]) if v is not None]
            skipped = draws - len(values)
            if not values:
                raise PreconditionError(f"every sample hit an eigenvalue at L={radius}")
            arr = np.array(values)
            q25, med, q75 = np.quantile(arr, [0.25, 0.5, 0.75])
            stderr = MEDIAN_EFFICIENCY * (q75 - q25) / IQR_TO_SIGMA / math.sqrt(len(arr)) if len(arr) > 1 else 0.0
            row = LocalizationRow(radius, len(arr), skipped, float(med), float(q25), float(q75), float(stderr))
            if row.skip_rate > SKIP_RATE_WARNING:
                logger.warning("L=%d: skip rate %.1f%% exceeds %.0f%%", radius, 100 * row.skip_rate, 100 * SKIP_RATE_WARNING)
            logger.info("L=%d: median %.4e (%d samples, %d skipped)", radius, med, len(arr), skipped)
            rows.append(row)

    fit = decay_fit_series([r.radius for r in rows], [r.median for r in rows], min_points=MIN_LADDER_POINTS)
    predicted = predicted_decay_rate(potential.variant, coupling, energy, threshold, nu) if coupling > 0 else math.sqrt(
        max(-energy, 0.0) * 2.0
    )
    return LocalizationResult(rows, fit, predicted, energy, threshold)
