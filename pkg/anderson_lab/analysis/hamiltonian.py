"""Finite-volume random Hamiltonians, resolvents, spectra and the dipole wall."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg, sparse
from scipy.sparse.linalg import ArpackNoConvergence, eigsh, gmres, splu

from ..core.errors import ConditioningError, EigenvalueHitError, NonConvergenceError
from ..core.lattice import Box, Site, boundary, unit_vectors
from ..disorder.base import SingleSitePotential
from ..disorder.potentials import DipolePotential
from ..disorder.sampling import DisorderSample, alloy_field

logger = logging.getLogger(__name__)

DIRECT_SOLVE_MAX_SITES = 20**3
DENSE_EIGEN_MAX_SITES = 12**3
ITERATIVE_RTOL = 1e-10
EIGEN_RTOL = 1e-9
HIT_NORM = 1e12


def box_laplacian(box: Box) -> sparse.csr_matrix:
    """-Delta/2 restricted to the box: diagonal 3, nearest-neighbour -1/2."""
    n = box.side
    tri = sparse.diags([-0.5, 1.0, -0.5], [-1, 0, 1], shape=(n, n))
    eye = sparse.identity(n)
    lap = (
        sparse.kron(sparse.kron(tri, eye), eye)
        + sparse.kron(sparse.kron(eye, tri), eye)
        + sparse.kron(sparse.kron(eye, eye), tri)
    )
    return lap.tocsr()


@dataclass
class FiniteHamiltonian:
    """H = -Delta/2 + lambda V_omega restricted to a box (simple truncation)."""

    box: Box
    matrix: sparse.csr_matrix
    potential_values: np.ndarray
    coupling: float
    provenance: dict = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return self.box.cardinality

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def index_of(self, site: Site) -> int:
        return self.box.index_of(site)

    def hermiticity_residual(self) -> float:
        diff = self.matrix - self.matrix.conj().T
        return float(abs(diff).max()) if diff.nnz else 0.0

    def to_triplets(self) -> list[str]:
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return [f"{coo.row[k]} {coo.col[k]} {coo.data[k]!r}" for k in order]

    def write_triplets(self, path: str | Path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(self.to_triplets()) + "\n")
        logger.info("Wrote %d matrix entries to %s", self.matrix.nnz, path)


def build(box: Box, coupling: float, potential: SingleSitePotential, sample: DisorderSample) -> FiniteHamiltonian:
    """Assemble the restricted Hamiltonian; raises IncompleteSampleError on missing couplings."""
    values = alloy_field(sample, potential, box)
    matrix = (box_laplacian(box) + coupling * sparse.diags(values)).tocsr()
    return FiniteHamiltonian(
        box=box,
        matrix=matrix,
        potential_values=values,
        coupling=coupling,
        provenance={"potential": potential.variant, "seed": sample.seed, **sample.provenance},
    )


def free_hamiltonian(box: Box) -> FiniteHamiltonian:
    return FiniteHamiltonian(box, box_laplacian(box), np.zeros(box.cardinality), 0.0, {"potential": "none"})


class ResolventSolver:
    """Factorized (H - E - i eps) for repeated solves on one Hamiltonian."""

    def __init__(self, h: FiniteHamiltonian | sparse.spmatrix, energy: float, epsilon: float = 0.0, box: Box | None = None):
        self.box = h.box if isinstance(h, FiniteHamiltonian) else box
        matrix = h.matrix if isinstance(h, FiniteHamiltonian) else sparse.csr_matrix(h)
        self.energy = energy
        self.epsilon = epsilon
        n = matrix.shape[0]
        z = energy + 1j * epsilon if epsilon != 0 else energy
        self._shifted = (matrix - z * sparse.identity(n, format="csr")).tocsc()
        if not np.iscomplexobj(self._shifted.data) and np.iscomplexobj(matrix.data):
            self._shifted = self._shifted.astype(complex)
        self._lu = None
        if n <= DIRECT_SOLVE_MAX_SITES:
            try:
                self._lu = splu(self._shifted)
            except RuntimeError as e:
                if epsilon == 0:
                    raise EigenvalueHitError(f"E={energy} is an eigenvalue of the finite Hamiltonian") from e
                raise ConditioningError(str(e)) from e

    def solve(self, rhs: np.ndarray, transpose: bool = False) -> np.ndarray:
        if self._lu is not None:
            x = self._lu.solve(rhs, trans="T" if transpose else "N")
        else:
            a = self._shifted.T if transpose else self._shifted
            x, info = gmres(a, rhs, rtol=ITERATIVE_RTOL, atol=0.0, restart=200, maxiter=2000)
            if info != 0:
                residual = float(np.linalg.norm(a @ x - rhs) / max(np.linalg.norm(rhs), 1e-300))
                raise NonConvergenceError(f"GMRES stopped with info={info}", residual=residual)
        if not np.all(np.isfinite(x)) or np.abs(x).max() > HIT_NORM:
            if self.epsilon == 0:
                raise EigenvalueHitError(f"E={self.energy} is (numerically) an eigenvalue")
            raise ConditioningError("resolvent solution blew up")
        return x

    def column(self, y: Site) -> np.ndarray:
        rhs = np.zeros(self._shifted.shape[0], dtype=self._shifted.dtype)
        rhs[self.box.index_of(y)] = 1.0
        return self.solve(rhs)

    def entry(self, x: Site, y: Site) -> complex:
        return complex(self.column(y)[self.box.index_of(x)])


def resolvent_entry(h: FiniteHamiltonian, energy: float, epsilon: float, x: Site, y: Site) -> complex:
    """(H - E - i eps)^{-1}(x, y)."""
    return ResolventSolver(h, energy, epsilon).entry(x, y)


@dataclass(frozen=True)
class SpectralWindow:
    """Half-open interval [lower, upper) of the real line."""

    lower: float
    upper: float

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError(f"empty window [{self.lower}, {self.upper})")

    @classmethod
    def centered(cls, center: float, width: float) -> SpectralWindow:
        return cls(center - width / 2.0, center + width / 2.0)

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def distance_to_band(self) -> float:
        """dist(I, [0, 6])."""
        return max(0.0, self.lower - 6.0, -self.upper)


def _count_below(matrix: sparse.spmatrix, t: float) -> int:
    """Number of eigenvalues < t by Sylvester inertia of an LDL^T-type factorization."""
    if math.isinf(t):
        return 0 if t < 0 else matrix.shape[0]
    shifted = (matrix - t * sparse.identity(matrix.shape[0])).tocsc()
    lu = splu(shifted, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0, options={"SymmetricMode": True})
    return int(np.count_nonzero(lu.U.diagonal() < 0))


def eigenvalues(h: FiniteHamiltonian) -> np.ndarray:
    return linalg.eigvalsh(h.dense())


def trace_projector(h: FiniteHamiltonian, window: SpectralWindow) -> int:
    """Number of eigenvalues in the window."""
    if h.dimension <= DENSE_EIGEN_MAX_SITES:
        return count_in_window(eigenvalues(h), window)
    return _count_below(h.matrix, window.upper) - _count_below(h.matrix, window.lower)


def count_in_window(evals: np.ndarray, window: SpectralWindow) -> int:
    return int(np.count_nonzero((evals >= window.lower) & (evals < window.upper)))


def ground_energy(h: FiniteHamiltonian) -> float:
    """Smallest eigenvalue of H."""
    if h.dimension <= DENSE_EIGEN_MAX_SITES:
        return float(linalg.eigvalsh(h.dense(), subset_by_index=[0, 0])[0])
    try:
        vals = eigsh(h.matrix, k=1, which="SA", tol=EIGEN_RTOL, return_eigenvectors=False)
    except ArpackNoConvergence as e:
        raise NonConvergenceError(f"ground state eigensolve did not converge: {e}") from e
    return float(vals[0])


def dipole_bound_state_energy(coupling: float) -> float:
    """E_m = 1 - sqrt(1 + 4 lambda^2): solves 1/(2 lambda) = int dq / (2 sin^2(pi q) - E_m)."""
    return 1.0 - math.sqrt(1.0 + 4.0 * coupling**2)


def chain_ground_energy(coupling: float, radius: int) -> float:
    """Ground energy of -Delta/2 - 2 lambda delta_0 on the chain {-L..L}."""
    n = 2 * radius + 1
    diag = np.ones(n)
    diag[radius] -= 2.0 * coupling
    off = np.full(n - 1, -0.5)
    return float(linalg.eigvalsh_tridiagonal(diag, off, select="i", select_range=(0, 0))[0])


def dipole_wall_ground(coupling: float, radius: int) -> tuple[float, float]:
    """(E_finite, E_m_exact) for the e1 restriction of the dipole wall configuration."""
    if not 0.0 < coupling <= 0.3:
        raise ValueError(f"dipole wall needs lambda in (0, 0.3], got {coupling}")
    if radius < 20:
        raise ValueError(f"dipole wall needs L >= 20, got {radius}")
    return chain_ground_energy(coupling, radius), dipole_bound_state_energy(coupling)


def transverse_offset(radius: int) -> float:
    """Ground energy of the two transverse truncated chains, 2 (1 - cos(pi/(2L+2)))."""
    return 2.0 * (1.0 - math.cos(math.pi / (2 * radius + 2)))


def dipole_slab_ground(coupling: float, radius: int) -> float:
    """Ground energy of the 3D box with couplings omega_i = -2 for i1 >= 0 under u_d.

    V = -2 on the plane x1 = 0 and 0 elsewhere.
    """
    box = Box(Site.origin(), radius)
    region = box.grow(1)
    mapping = {s: -2.0 for s in region.sites() if s.x >= 0}
    sample = DisorderSample.from_mapping(mapping, fill_box=region)
    h = build(box, coupling, DipolePotential(), sample)
    return ground_energy(h)


def restriction_difference(
    inner: Box, outer: Box, coupling: float, potential: SingleSitePotential, sample: DisorderSample,
    energy: float, x: Site, y: Site,
) -> float:
    """|R_inner(E; x, y) - R_outer(E; x, y)| for nested boxes sharing one sample."""
    r_in = resolvent_entry(build(inner, coupling, potential, sample), energy, 0.0, x, y)
    r_out = resolvent_entry(build(outer, coupling, potential, sample), energy, 0.0, x, y)
    return abs(r_in - r_out)


def boundary_coupling_norm(box: Box) -> float:
    """Operator norm of the hopping block between the box and its outer shell."""
    outer = box.grow(1)
    shell = [s for s in outer.sites() if s not in box]
    shell_index = {s: k for k, s in enumerate(shell)}
    inner = sorted(boundary(box))
    inner_index = {s: k for k, s in enumerate(inner)}
    gamma = np.zeros((len(inner), len(shell)))
    for s in inner:
        for e in unit_vectors():
            t = s + e
            if t in shell_index:
                gamma[inner_index[s], shell_index[t]] = -0.5
    return float(np.linalg.norm(gamma, 2))
