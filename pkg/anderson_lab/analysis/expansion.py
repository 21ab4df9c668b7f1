"""Stopping-rule resolvent expansion around the renormalized propagator.

With H_r = -Delta/2 - Sigma and R_r = (H_r - z)^{-1}, z = E + i eps, the box
resolvent R = (H - z)^{-1} of H = -Delta/2 + lambda V obeys

    R = A_0 + ... + A_{N-1} + A~_N R

where A_l sums the strings of V (order 1) and bullet (order 2) insertions of
total order l, each term (-1)^k R_r t_1 R_r ... t_k R_r with t = lambda V or
t = Sigma. All operators are dense matrices on the box.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from ..core.errors import (
    CombinatorialGuardError,
    ConditioningError,
    DimensionMismatchError,
    EigenvalueHitError,
    PreconditionError,
)
from ..core.lattice import Box, Site
from ..disorder.base import SingleSitePotential
from ..disorder.densities import DisorderDensity
from ..disorder.sampling import DisorderSample, alloy_field, sample_disorder, sample_seed
from .hamiltonian import box_laplacian
from .selfenergy import MAX_CONDITION, self_energy_operator

logger = logging.getLogger(__name__)

MAX_TERM_ORDER = 12
MIN_MC_SAMPLES = 100

TAG_ORDER = {"V": 1, "B": 2}


@dataclass(frozen=True)
class Term:
    """Ordered insertion tags; V is one lambda V factor, B one self-energy bullet."""

    tags: str

    @property
    def order(self) -> int:
        return sum(TAG_ORDER[t] for t in self.tags)

    @property
    def sign(self) -> int:
        return (-1) ** len(self.tags)

    def __str__(self) -> str:
        return self.tags


@lru_cache(maxsize=None)
def _strings(order: int) -> tuple[str, ...]:
    if order == 0:
        return ("",)
    if order < 0:
        return ()
    # V-first: [VV, B], [VVV, VB, BV]
    return tuple("V" + s for s in _strings(order - 1)) + tuple("B" + s for s in _strings(order - 2))


def enumerate_terms(order: int) -> list[Term]:
    """All V/B strings of total order ``order``."""
    if order < 1:
        raise PreconditionError(f"term order must be >= 1, got {order}")
    if order > MAX_TERM_ORDER:
        raise CombinatorialGuardError(f"term enumeration is limited to order {MAX_TERM_ORDER}, got {order}")
    return [Term(s) for s in _strings(order)]


@dataclass
class ExpansionOperators:
    """R_r, lambda V and Sigma as dense matrices on one box."""

    r_r: np.ndarray
    potential_values: np.ndarray
    sigma: np.ndarray
    coupling: float
    z: complex
    box: Box | None = None
    hamiltonian: np.ndarray | None = None  # -Delta/2 + lambda V on the box

    def __post_init__(self):
        n = self.r_r.shape[0]
        if self.r_r.shape != (n, n):
            raise DimensionMismatchError(f"R_r is not square: {self.r_r.shape}")
        if self.sigma.shape != (n, n):
            raise DimensionMismatchError(f"Sigma has shape {self.sigma.shape}, R_r has {self.r_r.shape}")
        if self.potential_values.shape != (n,):
            raise DimensionMismatchError(f"V has {self.potential_values.shape[0]} entries, R_r has dimension {n}")
        if self.hamiltonian is not None and self.hamiltonian.shape != (n, n):
            raise DimensionMismatchError(f"H has shape {self.hamiltonian.shape}, R_r has {self.r_r.shape}")

    @classmethod
    def on_box(
        cls,
        box: Box,
        coupling: float,
        energy: float,
        epsilon: float,
        potential: SingleSitePotential,
        sample: DisorderSample,
        sigma,
    ) -> ExpansionOperators:
        """Assemble every block on ``box``; ``sigma`` is a self energy or an explicit matrix."""
        lap = box_laplacian(box).toarray()
        sig = _sigma_matrix(sigma, box)
        z = complex(energy, epsilon)
        n = box.cardinality
        renormalized = lap - sig - z * np.eye(n)
        values = alloy_field(sample, potential, box)
        return cls(
            r_r=_inverse(renormalized, energy, epsilon, "renormalized"),
            potential_values=values,
            sigma=sig,
            coupling=coupling,
            z=z,
            box=box,
            hamiltonian=lap + coupling * np.diag(values),
        )

    @property
    def dimension(self) -> int:
        return self.r_r.shape[0]

    def theta(self, tag: str) -> np.ndarray:
        if tag == "V":
            return self.coupling * np.diag(self.potential_values)
        return self.sigma

    def renormalized_inverse(self) -> np.ndarray:
        """H_r - z, the inverse of R_r."""
        if self.hamiltonian is None:
            return np.linalg.inv(self.r_r)
        return self.hamiltonian - self.coupling * np.diag(self.potential_values) - self.sigma - self.z * np.eye(self.dimension)

    def full_resolvent(self) -> np.ndarray:
        """R = (R_r^{-1} + lambda V + Sigma)^{-1}."""
        h_minus_z = self.renormalized_inverse() + self.theta("V") + self.sigma
        return _inverse(h_minus_z, self.z.real, self.z.imag, "box")


def _sigma_matrix(sigma, box: Box) -> np.ndarray:
    if isinstance(sigma, np.ndarray):
        mat = sigma.astype(complex)
    elif sparse.issparse(sigma):
        mat = sigma.toarray().astype(complex)
    else:
        mat = self_energy_operator(sigma, box).toarray()
    if mat.shape != (box.cardinality, box.cardinality):
        raise DimensionMismatchError(f"Sigma has shape {mat.shape} on a box of {box.cardinality} sites")
    return mat


def _inverse(matrix: np.ndarray, energy: float, epsilon: float, what: str) -> np.ndarray:
    cond = np.linalg.cond(matrix)
    if not math.isfinite(cond) or cond > MAX_CONDITION:
        if epsilon == 0:
            raise EigenvalueHitError(f"E={energy} is an eigenvalue of the {what} operator (cond {cond:.2e})")
        raise ConditioningError(f"{what} resolvent is ill conditioned (cond {cond:.2e})")
    return np.linalg.inv(matrix)


def _term_product(term: Term, ops: ExpansionOperators, trailing: bool) -> np.ndarray:
    out = ops.r_r
    last = len(term.tags) - 1
    for k, tag in enumerate(term.tags):
        out = out @ ops.theta(tag)
        if trailing or k < last:
            out = out @ ops.r_r
    return term.sign * out


def build_A(order: int, ops: ExpansionOperators) -> np.ndarray:
    """A_l: sum over terms of order l of (-1)^k R_r t_1 R_r ... t_k R_r; A_0 = R_r."""
    if order == 0:
        return ops.r_r.copy()
    total = np.zeros_like(ops.r_r, dtype=complex)
    for term in enumerate_terms(order):
        total += _term_product(term, ops, trailing=True)
    return total


def build_A_prime(order: int, ops: ExpansionOperators) -> np.ndarray:
    """A'_N: the order-N terms without their trailing R_r, so A_N = A'_N R_r."""
    if order < 1:
        raise PreconditionError(f"A' needs N >= 1, got {order}")
    total = np.zeros_like(ops.r_r, dtype=complex)
    for term in enumerate_terms(order):
        total += _term_product(term, ops, trailing=False)
    return total


def build_B(order: int, ops: ExpansionOperators) -> np.ndarray:
    """B_N = -A_{N-1} Sigma, the bullets that overshoot order N."""
    return -build_A(order - 1, ops) @ ops.sigma


def build_A_tilde(order: int, ops: ExpansionOperators, method: str = "terms") -> np.ndarray:
    """A~_N, either as A'_N + B_N ("terms") or as A_N (H_r - z) - A_{N-1} Sigma ("identity")."""
    if order < 1:
        raise PreconditionError(f"A~ needs N >= 1, got {order}")
    if method == "terms":
        return build_A_prime(order, ops) + build_B(order, ops)
    if method == "identity":
        return build_A(order, ops) @ ops.renormalized_inverse() - build_A(order - 1, ops) @ ops.sigma
    raise ValueError(f"unknown assembly method {method!r}")


def operator_norm(matrix: np.ndarray) -> float:
    return float(np.linalg.norm(matrix, 2))


def telescoping_residual(ops: ExpansionOperators, order: int) -> float:
    """|| R - (A_0 + ... + A_{N-1} + A~_N R) || in the spectral norm."""
    if order < 1:
        raise PreconditionError(f"telescoping needs N >= 1, got {order}")
    resolvent = ops.full_resolvent()
    partial = sum(build_A(l, ops) for l in range(order))
    return operator_norm(resolvent - partial - build_A_tilde(order, ops) @ resolvent)


def telescoping_check(
    box: Box,
    coupling: float,
    energy: float,
    epsilon: float,
    sample: DisorderSample,
    order: int,
    potential: SingleSitePotential,
    sigma,
) -> float:
    """Residual of the exact decomposition on ``box`` for one disorder sample."""
    ops = ExpansionOperators.on_box(box, coupling, energy, epsilon, potential, sample, sigma)
    residual = telescoping_residual(ops, order)
    logger.debug("telescoping N=%d on %s: residual %.2e", order, box, residual)
    return residual


def assembly_gap(ops: ExpansionOperators, order: int) -> float:
    """Norm difference between the two assemblies of A~_N."""
    return operator_norm(build_A_tilde(order, ops, "terms") - build_A_tilde(order, ops, "identity"))


class RowRecursion:
    """Rows A_l(x, .) through r_l = (-lambda V r_{l-1} - r_{l-2} Sigma) R_r on one sparse LU.

    The renormalized operator does not depend on the disorder, so it is factored
    once and shared across samples.
    """

    def __init__(self, box: Box, energy: float, epsilon: float, sigma):
        self.box = box
        self.sigma = sparse.csr_matrix(_sigma_matrix(sigma, box))
        z = complex(energy, epsilon)
        shifted = (box_laplacian(box) - self.sigma - z * sparse.identity(box.cardinality)).tocsc()
        try:
            self._lu = splu(shifted.astype(complex))
        except RuntimeError as e:
            raise EigenvalueHitError(f"renormalized operator singular at E={energy}") from e
        self._sigma_t = self.sigma.T.tocsr()

    def rows(self, x: Site, coupling: float, potential_values: np.ndarray, order_max: int) -> list[np.ndarray]:
        unit = np.zeros(self.box.cardinality, dtype=complex)
        unit[self.box.index_of(x)] = 1.0
        rows = [self._lu.solve(unit, trans="T")]
        prev = np.zeros_like(unit)
        for _ in range(order_max):
            rhs = -coupling * potential_values * rows[-1] - self._sigma_t @ prev
            prev = rows[-1]
            rows.append(self._lu.solve(rhs, trans="T"))
        return rows


def expansion_rows(ops: ExpansionOperators, x: Site, order_max: int) -> list[np.ndarray]:
    """Rows A_0(x, .) .. A_{order_max}(x, .) from the dense blocks."""
    if ops.box is None:
        raise PreconditionError("row recursion needs operators assembled on a box")
    rows = [ops.r_r[ops.box.index_of(x)].astype(complex)]
    prev = np.zeros(ops.dimension, dtype=complex)
    for _ in range(order_max):
        nxt = (-ops.coupling * ops.potential_values * rows[-1] - prev @ ops.sigma) @ ops.r_r
        prev = rows[-1]
        rows.append(nxt)
    return rows


@dataclass
class MomentEstimate:
    order: int
    x: Site
    y: Site
    mean_sq: float
    stderr: float
    samples: int


def mc_moment_A(
    box: Box,
    coupling: float,
    energy: float,
    epsilon: float,
    order: int,
    x: Site,
    y: Site,
    samples: int,
    seed: int,
    potential: SingleSitePotential,
    density: DisorderDensity,
    sigma,
    workers: int = 1,
    min_samples: int = MIN_MC_SAMPLES,
) -> MomentEstimate:
    """Monte Carlo E|A_l(x, y)|^2 with its standard error."""
    return mc_moment_A_many(
        box, coupling, energy, epsilon, order, [(x, y)], samples, seed, potential, density, sigma, workers, min_samples
    )[0]


def mc_moment_A_many(
    box: Box,
    coupling: float,
    energy: float,
    epsilon: float,
    order: int,
    pairs: list[tuple[Site, Site]],
    samples: int,
    seed: int,
    potential: SingleSitePotential,
    density: DisorderDensity,
    sigma,
    workers: int = 1,
    min_samples: int = MIN_MC_SAMPLES,
) -> list[MomentEstimate]:
    """E|A_l(x, y)|^2 for several pairs on the same disorder samples."""
    if samples < min_samples:
        raise PreconditionError(f"Monte Carlo needs at least {min_samples} samples, got {samples}")
    for x, y in pairs:
        if x not in box or y not in box:
            raise PreconditionError(f"pair ({x}, {y}) is not inside {box}")
    recursion = RowRecursion(box, energy, epsilon, sigma)
    columns = [box.index_of(y) for _, y in pairs]

    def one(index: int) -> np.ndarray:
        values = np.zeros(box.cardinality)
        if order > 0 and coupling != 0:
            sample = sample_disorder(density, box, potential.period, sample_seed(seed, index), potential)
            values = alloy_field(sample, potential, box)
        rows: dict[Site, np.ndarray] = {}
        out = np.empty(len(pairs))
        for k, (x, _) in enumerate(pairs):
            if x not in rows:
                rows[x] = recursion.rows(x, coupling, values, order)[order]
            out[k] = abs(rows[x][columns[k]]) ** 2
        return out

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        draws = np.array(list(pool.map(one, range(samples))))

    estimates = []
    for k, (x, y) in enumerate(pairs):
        col = draws[:, k]
        stderr = 0.0 if np.ptp(col) == 0.0 else float(col.std(ddof=1) / math.sqrt(samples))
        estimates.append(MomentEstimate(order, x, y, float(col.mean()), stderr, samples))
        logger.debug("E|A_%d(%s,%s)|^2 = %.4e +- %.1e", order, x, y, col.mean(), stderr)
    return estimates


SHIFT = Site(1, 1, 0)
PROFILE_SOURCE = Site(-1, 0, 0)
SHIFT_SIGMAS = 3.0


def mirror(site: Site) -> Site:
    """(s1, s2, s3) -> (-s2, -s1, s3): preserves centred boxes and sends PROFILE_SOURCE + r e3 to itself + SHIFT."""
    return Site(-site.y, -site.x, site.z)


def mirror_symmetric(potential: SingleSitePotential) -> bool:
    """Whether the alloy field's law is invariant under ``mirror``."""
    k = potential.period
    support = potential.support()
    return k[0] == k[1] and all(math.isclose(potential.value(mirror(s)), v, rel_tol=1e-12) for s, v in support.items())


def profile_pairs(max_offset: int) -> list[tuple[Site, Site]]:
    """(x, x + r e3) for r = 1..max_offset with x = PROFILE_SOURCE."""
    return [(PROFILE_SOURCE, PROFILE_SOURCE + Site(0, 0, r)) for r in range(1, max_offset + 1)]


@dataclass
class MomentProfile:
    """E|A_l|^2 along an axis and along the same axis shifted by SHIFT, from shared samples."""

    order: int
    base: list[MomentEstimate]
    shifted: list[MomentEstimate]

    def shift_deviations(self) -> list[tuple[int, float, float]]:
        """(offset, |difference|, SHIFT_SIGMAS combined stderr) per offset."""
        out = []
        for r, (a, b) in enumerate(zip(self.base, self.shifted), start=1):
            out.append((r, abs(a.mean_sq - b.mean_sq), SHIFT_SIGMAS * math.hypot(a.stderr, b.stderr)))
        return out

    def shift_invariant(self) -> bool:
        return all(diff <= tol for _, diff, tol in self.shift_deviations())

    def monotone_decay(self) -> bool:
        means = [e.mean_sq for e in self.base]
        return all(b < a for a, b in zip(means, means[1:]))


def moment_profile(
    box: Box,
    coupling: float,
    energy: float,
    epsilon: float,
    order: int,
    max_offset: int,
    samples: int,
    seed: int,
    potential: SingleSitePotential,
    density: DisorderDensity,
    sigma,
    workers: int = 1,
) -> MomentProfile:
    """E|A_l(x, x + r e3)|^2 and E|A_l(x + a, x + a + r e3)|^2, a = SHIFT, r = 1..max_offset.

    Each base pair is the ``mirror`` image of its shifted pair, so on a centred
    box the two columns agree in expectation whenever the disorder law is
    mirror symmetric; boundary truncation does not enter the comparison.
    """
    if max_offset < 2:
        raise PreconditionError(f"a decay profile needs at least two offsets, got {max_offset}")
    base = profile_pairs(max_offset)
    shifted = [(x + SHIFT, y + SHIFT) for x, y in base]
    estimates = mc_moment_A_many(
        box, coupling, energy, epsilon, order, base + shifted, samples, seed, potential, density, sigma, workers
    )
    profile = MomentProfile(order, estimates[: len(base)], estimates[len(base):])
    logger.info(
        "E|A_%d|^2 profile on %s: shift invariant %s, monotone %s", order, box, profile.shift_invariant(),
        profile.monotone_decay()
    )
    return profile


def expansion_order(e_star: float, constant: float, coupling: float) -> int:
    """N with (4N)^4 = sqrt(E*) / (C lambda^2), rounded down, at least 1."""
    if e_star <= 0 or constant <= 0 or coupling <= 0:
        raise PreconditionError("expansion order needs E* > 0, C > 0 and lambda > 0")
    n = (math.sqrt(e_star) / (constant * coupling**2)) ** 0.25 / 4.0
    return max(1, int(math.floor(n)))
