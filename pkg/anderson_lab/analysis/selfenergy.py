"""Self-consistent self-energy solvers for the three single-site variants.

Every solver starts from sigma = 0, iterates the fixed-point map until the
step size drops below ``tol`` and then asserts the a-priori bound for its
variant. The returned report records per-iteration contraction ratios.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal, sparse
from scipy.sparse.linalg import splu

from ..core.errors import BoundViolationError, ConditioningError, InadmissibleEnergyError, NonConvergenceError
from ..core.lattice import DIM, Box, Momentum, Site, TorusGrid, neighbour_sum_factor, unit_vectors
from ..core.models import SolverReport
from ..disorder.base import SingleSitePotential
from ..disorder.potentials import NonOverlappingPotential

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 200
DIPOLE_LAMBDA_CAP = 0.2
MIN_DENOMINATOR = 1e-8
MAX_CONDITION = 1e12
RATIO_NOISE_FLOOR = 1e-13
BOUND_SLACK = 1e-12


def threshold_overlapping(coupling: float, u_hat_sup: float) -> float:
    """E_0 = -2 lambda^2 |u_hat|^2 - 2 lambda^4 |u_hat|^4."""
    a = coupling**2 * u_hat_sup**2
    return -2.0 * a - 2.0 * a * a


def kappa(coupling: float, potential: NonOverlappingPotential) -> float:
    """kappa = 4 n lambda^2 |u|_inf^2."""
    return 4.0 * potential.n * coupling**2 * potential.sup_norm() ** 2


def threshold_nonoverlapping(coupling: float, potential: NonOverlappingPotential, energy: float) -> float:
    """E_0 = -kappa ((6 - 2E)^diam |cell| + 1), evaluated at the query energy."""
    k = kappa(coupling, potential)
    return -k * (neighbour_sum_factor(energy) ** potential.diameter * potential.n + 1.0)


def threshold_dipole(coupling: float) -> float:
    """E_d = -(1 + lambda) lambda^2."""
    return -(1.0 + coupling) * coupling**2


# ---------------------------------------------------------------------------
# Scalar (overlapping) case
# ---------------------------------------------------------------------------


@dataclass
class ScalarSelfEnergy:
    """sigma(p) = sum_k c_k e^{i 2pi p.k} over offsets k in supp u - supp u."""

    coefficients: dict[Site, complex]
    energy: float
    epsilon: float
    coupling: float
    grid_points: int
    report: SolverReport | None = None

    variant = "overlapping"

    def on_grid(self, grid: TorusGrid) -> np.ndarray:
        return grid.synthesize(self.coefficients)

    def value(self, p: Momentum) -> complex:
        return complex(sum(c * np.exp(2j * np.pi * p.dot(k)) for k, c in self.coefficients.items()))

    def sup_norm(self, grid: TorusGrid | None = None) -> float:
        return float(np.abs(self.on_grid(grid or TorusGrid(self.grid_points))).max())

    def kernel(self, offset: Site) -> complex:
        """Convolution kernel Sigma(x, y) for y - x = offset."""
        return self.coefficients.get(offset, 0.0)


def autocorrelation(u: SingleSitePotential) -> dict[Site, float]:
    """a(k) = sum_m u(m + k) u(m)."""
    cube = u.dense()
    r = u.radius
    corr = signal.correlate(cube, cube, mode="full", method="direct")
    out = {}
    for idx in zip(*np.nonzero(np.abs(corr) > 1e-15)):
        out[Site(idx[0] - 2 * r, idx[1] - 2 * r, idx[2] - 2 * r)] = float(corr[idx])
    return out


def check_denominator(den: np.ndarray, grid: TorusGrid):
    worst = float(np.abs(den).min())
    if worst < MIN_DENOMINATOR:
        idx = tuple(int(i) for i in np.unravel_index(np.argmin(np.abs(den)), den.shape))
        raise ConditioningError(f"renormalized denominator {worst:.2e} at q={grid.point(idx).components}")


class _RatioTracker:
    def __init__(self):
        self.ratios: list[float] = []
        self._prev: float | None = None

    def push(self, change: float, scale: float):
        if self._prev is not None and self._prev > RATIO_NOISE_FLOOR * max(1.0, scale):
            self.ratios.append(change / self._prev)
        self._prev = change


def solve_sigma_overlapping(
    coupling: float,
    energy: float,
    epsilon: float,
    potential: SingleSitePotential,
    grid: TorusGrid,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> ScalarSelfEnergy:
    """Fixed point of sigma(p) = lambda^2 int |u_hat(p-q)|^2 / (e(q) - E - i eps - sigma(q)) dq."""
    u_sup = potential.u_hat_sup()
    e0 = threshold_overlapping(coupling, u_sup)
    if not energy < e0 and coupling > 0:
        raise InadmissibleEnergyError(f"E={energy} is not below E_0={e0:.6g}", energy, e0)
    if coupling == 0 and energy >= 0:
        raise InadmissibleEnergyError(f"E={energy} must be negative", energy, 0.0)
    if abs(epsilon) > coupling**2:
        raise InadmissibleEnergyError(f"|eps|={abs(epsilon)} exceeds lambda^2={coupling**2}", energy, e0)

    corr = autocorrelation(potential)
    offsets = list(corr)
    if max(k.sup_norm() for k in offsets) >= grid.points // 2:
        raise ConditioningError(f"support of u too wide for M={grid.points}")
    weights = np.array([coupling**2 * corr[k] for k in offsets])
    negated = [-k for k in offsets]

    disp = grid.dispersion()
    sigma_grid = np.zeros_like(disp, dtype=complex)
    coefficients = {k: 0j for k in offsets}
    tracker = _RatioTracker()
    change = math.inf
    for iteration in range(1, max_iter + 1):
        den = disp - energy - 1j * epsilon - sigma_grid
        check_denominator(den, grid)
        integrals = grid.fourier_coefficients(1.0 / den, negated)
        coefficients = dict(zip(offsets, weights * integrals))
        new_grid = grid.synthesize(coefficients)
        change = float(np.abs(new_grid - sigma_grid).max())
        tracker.push(change, float(np.abs(new_grid).max()))
        logger.debug("overlapping iter %d: step %.3e", iteration, change)
        sigma_grid = new_grid
        if change <= tol:
            break
    else:
        raise NonConvergenceError(
            f"overlapping self energy did not converge in {max_iter} iterations (step {change:.3e})",
            tracker.ratios,
            change,
        )

    norm = float(np.abs(sigma_grid).max())
    bound = min(-energy - 2.0 * coupling**4 * u_sup**4, 2.0 * coupling**2 * u_sup**2)
    report = SolverReport(
        variant="overlapping",
        iterations=iteration,
        residual=change,
        norm=norm,
        bound=bound,
        contraction_factor=1.0 / math.sqrt(2.0),
        tolerance=tol,
        ratios=tracker.ratios,
    )
    if norm > bound + BOUND_SLACK:
        raise BoundViolationError(f"|sigma|_inf={norm:.6g} exceeds bound {bound:.6g}")
    logger.info("overlapping sigma converged: %d iterations, |sigma|=%.4g, bound %.4g", iteration, norm, bound)
    return ScalarSelfEnergy(coefficients, energy, epsilon, coupling, grid.points, report)


# ---------------------------------------------------------------------------
# Dipole case
# ---------------------------------------------------------------------------


@dataclass
class DipoleSelfEnergy:
    """sigma(p) = A + B sin^2(pi p1)."""

    a: complex
    b: complex
    energy: float
    epsilon: float
    coupling: float
    grid_points: int
    report: SolverReport | None = None

    variant = "dipole"

    @property
    def coefficients(self) -> dict[Site, complex]:
        # sin^2(pi p1) = 1/2 - (e^{i 2pi p1} + e^{-i 2pi p1}) / 4
        return {
            Site.origin(): self.a + self.b / 2.0,
            Site(1, 0, 0): -self.b / 4.0,
            Site(-1, 0, 0): -self.b / 4.0,
        }

    def on_grid(self, grid: TorusGrid) -> np.ndarray:
        s1 = np.sin(np.pi * grid.axis()) ** 2
        return np.broadcast_to(self.a + self.b * s1[:, None, None], (grid.points,) * DIM)

    def value(self, p: Momentum) -> complex:
        return complex(self.a + self.b * math.sin(math.pi * p.components[0]) ** 2)

    def kernel(self, offset: Site) -> complex:
        return self.coefficients.get(offset, 0.0)

    def g_norm(self) -> float:
        return abs(self.a) + self.coupling * abs(self.b)


def solve_sigma_dipole(
    coupling: float,
    energy: float,
    epsilon: float,
    grid: TorusGrid,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    coupling_cap: float = DIPOLE_LAMBDA_CAP,
) -> DipoleSelfEnergy:
    """Two-parameter fixed point (A, B) for the dipole potential."""
    if coupling > coupling_cap:
        raise InadmissibleEnergyError(f"lambda={coupling} exceeds the dipole smallness cap {coupling_cap}")
    e_d = threshold_dipole(coupling)
    if not energy < e_d and coupling > 0:
        raise InadmissibleEnergyError(f"E={energy} is not below E_d={e_d:.6g}", energy, e_d)
    if coupling == 0 and energy >= 0:
        raise InadmissibleEnergyError(f"E={energy} must be negative", energy, 0.0)
    if abs(epsilon) > coupling**2:
        raise InadmissibleEnergyError(f"|eps|={abs(epsilon)} exceeds lambda^2={coupling**2}", energy, e_d)

    disp = grid.dispersion()
    s1 = (np.sin(np.pi * grid.axis()) ** 2)[:, None, None]
    c1 = np.cos(2.0 * np.pi * grid.axis())[:, None, None]
    a, b = 0j, 0j
    tracker = _RatioTracker()
    change = math.inf
    for iteration in range(1, max_iter + 1):
        den = disp - energy - 1j * epsilon - a - b * s1
        check_denominator(den, grid)
        f = 1.0 / den
        new_a = 4.0 * coupling**2 * grid.integrate(s1 * f)
        new_b = 4.0 * coupling**2 * grid.integrate(c1 * f)
        change = abs(new_a - a) + coupling * abs(new_b - b)
        tracker.push(change, abs(new_a) + abs(new_b))
        logger.debug("dipole iter %d: step %.3e", iteration, change)
        a, b = new_a, new_b
        if change <= tol:
            break
    else:
        raise NonConvergenceError(
            f"dipole self energy did not converge in {max_iter} iterations (step {change:.3e})",
            tracker.ratios,
            change,
        )

    result = DipoleSelfEnergy(a, b, energy, epsilon, coupling, grid.points)
    lam2 = coupling**2
    report = SolverReport(
        variant="dipole",
        iterations=iteration,
        residual=change,
        norm=result.g_norm(),
        bound=lam2 + coupling * 14.0 * lam2,
        contraction_factor=20.0 * coupling,
        tolerance=tol,
        ratios=tracker.ratios,
    )
    if coupling > 0 and not (abs(a) < lam2 and abs(b) < 14.0 * lam2):
        raise BoundViolationError(f"dipole sigma out of bounds: |A|={abs(a):.4g}, |B|={abs(b):.4g}, lambda^2={lam2:.4g}")
    result.report = report
    logger.info("dipole sigma converged: %d iterations, A=%.4g, B=%.4g", iteration, abs(a), abs(b))
    return result


# ---------------------------------------------------------------------------
# Matrix (non-overlapping) case
# ---------------------------------------------------------------------------


@dataclass
class MatrixSelfEnergy:
    """n x n self-energy matrix on the primitive cell, extended periodically."""

    sigma: np.ndarray
    potential: NonOverlappingPotential
    energy: float
    epsilon: float
    coupling: float
    grid_points: int
    report: SolverReport | None = None

    variant = "nonoverlapping"

    @property
    def d_matrix(self) -> np.ndarray:
        return self.potential.d_matrix()

    def kernel_sites(self, x: Site, y: Site) -> complex:
        """Sigma(x, y): sigma_ij if x and y sit in the same translate of the cell, else 0."""
        i, t = self.potential.decompose(x)
        j, s = self.potential.decompose(y)
        return complex(self.sigma[i, j]) if t == s else 0j


@dataclass
class BlochFiber:
    """Floquet fibers of -Delta/2 - E - i eps - Sigma over the reduced zone."""

    potential: NonOverlappingPotential
    grid: TorusGrid
    thetas: np.ndarray = field(init=False)  # (M^3, 3)
    _hops: list[tuple[int, int, np.ndarray]] = field(init=False)

    def __post_init__(self):
        k = np.array(self.potential.period, dtype=float)
        a = self.grid.axis()
        mesh = np.stack(np.meshgrid(a, a, a, indexing="ij"), axis=-1).reshape(-1, DIM)
        self.thetas = mesh / k
        hops = []
        for i, x in enumerate(self.potential.cell):
            for e in unit_vectors():
                j, t = self.potential.decompose(x + e)
                hops.append((i, j, np.array(t.coords, dtype=float)))
        self._hops = hops

    def matrices(self, sigma: np.ndarray, energy: float, epsilon: float) -> np.ndarray:
        """h(theta) for every grid theta, shape (M^3, n, n)."""
        n = self.potential.n
        base = (3.0 - energy - 1j * epsilon) * np.eye(n) - sigma
        h = np.broadcast_to(base, (len(self.thetas), n, n)).copy()
        for i, j, t in self._hops:
            h[:, i, j] += -0.5 * np.exp(2j * np.pi * (self.thetas @ t))
        return h

    def inverses(self, sigma: np.ndarray, energy: float, epsilon: float) -> np.ndarray:
        h = self.matrices(sigma, energy, epsilon)
        cond = np.linalg.cond(h)
        if not np.all(np.isfinite(cond)) or cond.max() > MAX_CONDITION:
            worst = int(np.argmax(np.where(np.isfinite(cond), cond, np.inf)))
            raise ConditioningError(f"singular Bloch fiber at theta={tuple(self.thetas[worst])}")
        return np.linalg.inv(h)

    def cell_green(self, sigma: np.ndarray, energy: float, epsilon: float) -> np.ndarray:
        """S_ij = int h(theta)^{-1}_ij d theta = R_r(x_i, x_j)."""
        return self.inverses(sigma, energy, epsilon).mean(axis=0)

    def kernel(self, sigma: np.ndarray, energy: float, epsilon: float, x: Site, y: Site) -> complex:
        """R_r(x, y) for arbitrary sites via the cell decomposition."""
        i, t = self.potential.decompose(x)
        j, s = self.potential.decompose(y)
        phase = np.exp(2j * np.pi * (self.thetas @ np.array((t - s).coords, dtype=float)))
        return complex(np.mean(self.inverses(sigma, energy, epsilon)[:, i, j] * phase))


def bloch_fiber(theta: Momentum, sigma: MatrixSelfEnergy | np.ndarray, potential: NonOverlappingPotential,
                energy: float, epsilon: float) -> np.ndarray:
    """Inverse Floquet fiber at a single quasi-momentum theta (reduced-zone coordinates)."""
    sig = sigma.sigma if isinstance(sigma, MatrixSelfEnergy) else np.asarray(sigma)
    n = potential.n
    h = (3.0 - energy - 1j * epsilon) * np.eye(n, dtype=complex) - sig
    th = np.array(theta.components)
    for i, x in enumerate(potential.cell):
        for e in unit_vectors():
            j, t = potential.decompose(x + e)
            h[i, j] += -0.5 * np.exp(2j * np.pi * th @ np.array(t.coords, dtype=float))
    if np.linalg.cond(h) > MAX_CONDITION:
        raise ConditioningError(f"singular Bloch fiber at theta={theta.components}")
    return np.linalg.inv(h)


def solve_sigma_nonoverlapping(
    coupling: float,
    energy: float,
    epsilon: float,
    potential: NonOverlappingPotential,
    grid: TorusGrid,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> MatrixSelfEnergy:
    """Fixed point sigma = lambda^2 D S(sigma) D with S from Bloch-fiber quadrature."""
    kap = kappa(coupling, potential)
    if coupling > 0 and not energy < -kap:
        raise InadmissibleEnergyError(f"E={energy} is not below -kappa={-kap:.6g}", energy, -kap)
    if coupling == 0 and energy >= 0:
        raise InadmissibleEnergyError(f"E={energy} must be negative", energy, 0.0)
    if coupling > 0 and not abs(epsilon) < kap / 2.0:
        raise InadmissibleEnergyError(f"|eps|={abs(epsilon)} must be below kappa/2={kap / 2:.6g}", energy, -kap)

    fiber = BlochFiber(potential, grid)
    d = potential.d_matrix()
    n = potential.n
    sigma = np.zeros((n, n), dtype=complex)
    tracker = _RatioTracker()
    change = math.inf
    for iteration in range(1, max_iter + 1):
        s_mat = fiber.cell_green(sigma, energy, epsilon)
        new_sigma = coupling**2 * d @ s_mat @ d
        change = float(np.linalg.norm(new_sigma - sigma, 2))
        tracker.push(change, float(np.linalg.norm(new_sigma, 2)))
        logger.debug("nonoverlapping iter %d: step %.3e", iteration, change)
        sigma = new_sigma
        if change <= tol:
            break
    else:
        raise NonConvergenceError(
            f"matrix self energy did not converge in {max_iter} iterations (step {change:.3e})",
            tracker.ratios,
            change,
        )

    norm = float(np.linalg.norm(sigma, 2))
    bound = kap / 2.0
    report = SolverReport(
        variant="nonoverlapping",
        iterations=iteration,
        residual=change,
        norm=norm,
        bound=bound,
        contraction_factor=1.0 / n,
        tolerance=tol,
        ratios=tracker.ratios,
    )
    if norm > bound + BOUND_SLACK:
        raise BoundViolationError(f"|sigma|={norm:.6g} exceeds 2 n lambda^2 |u|^2 = {bound:.6g}")
    logger.info("matrix sigma converged: %d iterations, |sigma|=%.4g, bound %.4g", iteration, norm, bound)
    return MatrixSelfEnergy(sigma, potential, energy, epsilon, coupling, grid.points, report)


def box_cell_green(sigma: MatrixSelfEnergy, radius: int = 10) -> np.ndarray:
    """S_ij from direct inversion on a Dirichlet-truncated box of radius ``radius``.

    Independent oracle for the Bloch-fiber quadrature.
    """
    pot = sigma.potential
    box = Box(Site.origin(), radius)
    n = box.side
    tri = sparse.diags([-0.5, 1.0, -0.5], [-1, 0, 1], shape=(n, n))
    eye = sparse.identity(n)
    lap = sparse.kron(sparse.kron(tri, eye), eye) + sparse.kron(sparse.kron(eye, tri), eye) + sparse.kron(
        sparse.kron(eye, eye), tri
    )
    sig = cell_sigma_operator(sigma, box)
    z = sigma.energy + 1j * sigma.epsilon
    lu = splu((lap - sig - z * sparse.identity(box.cardinality)).tocsc())
    out = np.zeros((pot.n, pot.n), dtype=complex)
    for j, xj in enumerate(pot.cell):
        rhs = np.zeros(box.cardinality, dtype=complex)
        rhs[box.index_of(xj)] = 1.0
        col = lu.solve(rhs)
        for i, xi in enumerate(pot.cell):
            out[i, j] = col[box.index_of(xi)]
    return out


def cell_sigma_operator(sigma: MatrixSelfEnergy, box: Box) -> sparse.csr_matrix:
    """Block-diagonal Sigma restricted to the box (cells cut by the boundary keep their inside part)."""
    rows, cols, vals = [], [], []
    pot = sigma.potential
    for x in box.sites():
        i, t = pot.decompose(x)
        for j, xj in enumerate(pot.cell):
            y = xj + t
            if y in box and sigma.sigma[i, j] != 0:
                rows.append(box.index_of(x))
                cols.append(box.index_of(y))
                vals.append(sigma.sigma[i, j])
    return sparse.csr_matrix((vals, (rows, cols)), shape=(box.cardinality, box.cardinality), dtype=complex)


def convolution_operator(sigma: ScalarSelfEnergy | DipoleSelfEnergy, box: Box) -> sparse.csr_matrix:
    """Sigma(x, y) = c_{y-x} truncated to the box."""
    coeffs = sigma.coefficients
    rows, cols, vals = [], [], []
    coords = box.coordinates()
    for k, c in coeffs.items():
        if c == 0:
            continue
        shifted = coords + np.array(k.coords)
        inside = np.all(np.abs(shifted - np.array(box.center.coords)) <= box.radius, axis=1)
        src = np.nonzero(inside)[0]
        n = box.side
        rel = shifted[inside] - np.array(box.center.coords) + box.radius
        dst = (rel[:, 0] * n + rel[:, 1]) * n + rel[:, 2]
        rows.extend(src.tolist())
        cols.extend(dst.tolist())
        vals.extend([c] * len(src))
    return sparse.csr_matrix((vals, (rows, cols)), shape=(box.cardinality, box.cardinality), dtype=complex)


def self_energy_operator(sigma, box: Box) -> sparse.csr_matrix:
    """Sigma realized as a sparse matrix on the box, whatever the variant."""
    if isinstance(sigma, MatrixSelfEnergy):
        return cell_sigma_operator(sigma, box)
    return convolution_operator(sigma, box)


def epsilon_continuity(solve, epsilons: list[float]) -> list[tuple[float, float]]:
    """(eps, |sigma(eps) - sigma(0)|) for each eps; ``solve`` maps eps to a self energy."""

    def as_vector(s):
        if isinstance(s, MatrixSelfEnergy):
            return s.sigma.ravel()
        if isinstance(s, DipoleSelfEnergy):
            return np.array([s.a, s.b])
        keys = sorted(s.coefficients)
        return np.array([s.coefficients[k] for k in keys])

    base = as_vector(solve(0.0))
    out = []
    for eps in epsilons:
        diff = float(np.abs(as_vector(solve(eps)) - base).max())
        logger.debug("eps-continuity eps=%.1e diff=%.3e", eps, diff)
        out.append((eps, diff))
    return out
