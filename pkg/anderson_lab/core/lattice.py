"""Lattice geometry on Z^3, the dispersion relation, and torus quadrature."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator

import numpy as np

from .errors import DomainError

logger = logging.getLogger(__name__)

DIM = 3
DEFAULT_GRID_POINTS = 128
LADDER_RTOL = 1e-6
HOPPING = 0.5  # -Delta/2 couples nearest neighbours with weight 1/2


@dataclass(frozen=True, order=True)
class Site:
    """A point of Z^3."""

    x: int
    y: int
    z: int

    @classmethod
    def of(cls, coords: Iterable[int]) -> Site:
        a, b, c = (int(v) for v in coords)
        return cls(a, b, c)

    @classmethod
    def origin(cls) -> Site:
        return cls(0, 0, 0)

    @property
    def coords(self) -> tuple[int, int, int]:
        return (self.x, self.y, self.z)

    def __add__(self, other: Site) -> Site:
        return Site(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: Site) -> Site:
        return Site(self.x - other.x, self.y - other.y, self.z - other.z)

    def __neg__(self) -> Site:
        return Site(-self.x, -self.y, -self.z)

    def scale(self, k: tuple[int, int, int]) -> Site:
        return Site(self.x * k[0], self.y * k[1], self.z * k[2])

    def sup_norm(self) -> int:
        return max(abs(self.x), abs(self.y), abs(self.z))

    def l1_norm(self) -> int:
        return abs(self.x) + abs(self.y) + abs(self.z)

    def euclidean_norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def dist_sup(self, other: Site) -> int:
        return (self - other).sup_norm()

    def dist_euclid(self, other: Site) -> float:
        return (self - other).euclidean_norm()

    def __str__(self) -> str:
        return f"({self.x},{self.y},{self.z})"


def unit_vectors() -> list[Site]:
    """The six nearest-neighbour offsets, +e1, -e1, +e2, ..."""
    out = []
    for axis in range(DIM):
        for sign in (1, -1):
            c = [0, 0, 0]
            c[axis] = sign
            out.append(Site.of(c))
    return out


def offsets_within(radius: int) -> list[Site]:
    """All offsets w with |w|_inf <= radius, lexicographic."""
    r = range(-radius, radius + 1)
    return [Site(a, b, c) for a, b, c in itertools.product(r, r, r)]


@dataclass(frozen=True)
class Box:
    """The cube Lambda_{L,x} = {y : |y - x|_inf <= L}.

    Sites are indexed lexicographically with the first coordinate slowest,
    matching ``np.indices`` / C order on a (2L+1)^3 array.
    """

    center: Site
    radius: int

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError(f"box radius must be >= 0, got {self.radius}")

    @property
    def side(self) -> int:
        return 2 * self.radius + 1

    @property
    def cardinality(self) -> int:
        return self.side**DIM

    def __len__(self) -> int:
        return self.cardinality

    def __contains__(self, site: Site) -> bool:
        return self.center.dist_sup(site) <= self.radius

    def index_of(self, site: Site) -> int:
        if site not in self:
            raise KeyError(f"site {site} not in {self}")
        n = self.side
        i = site.x - self.center.x + self.radius
        j = site.y - self.center.y + self.radius
        k = site.z - self.center.z + self.radius
        return (i * n + j) * n + k

    def site_of(self, index: int) -> Site:
        n = self.side
        i, rem = divmod(index, n * n)
        j, k = divmod(rem, n)
        return Site(
            i + self.center.x - self.radius,
            j + self.center.y - self.radius,
            k + self.center.z - self.radius,
        )

    def sites(self) -> Iterator[Site]:
        for idx in range(self.cardinality):
            yield self.site_of(idx)

    def coordinates(self) -> np.ndarray:
        """(|Lambda|, 3) integer array of site coordinates in index order."""
        n = self.side
        grid = np.indices((n, n, n)).reshape(DIM, -1).T
        return grid - self.radius + np.array(self.center.coords)

    def grow(self, by: int) -> Box:
        return Box(self.center, self.radius + by)

    def distance_to_boundary(self, site: Site) -> int:
        """Sup-distance from an interior site to the outer shell of the box."""
        return self.radius - self.center.dist_sup(site)

    def __str__(self) -> str:
        return f"Box(center={self.center}, L={self.radius})"


def boundary(box: Box) -> set[Site]:
    """Sites of the box with a nearest neighbour outside it."""
    if box.radius == 0:
        return {box.center}
    return {s for s in box.sites() if box.distance_to_boundary(s) == 0}


@dataclass(frozen=True)
class Momentum:
    """A point of the torus T^3 = [-1/2, 1/2)^3."""

    components: tuple[float, float, float]

    def __post_init__(self):
        reduced = tuple(float(c - math.floor(c + 0.5)) for c in self.components)
        object.__setattr__(self, "components", reduced)

    def __neg__(self) -> Momentum:
        return Momentum(tuple(-c for c in self.components))

    def __add__(self, other: Momentum) -> Momentum:
        return Momentum(tuple(a + b for a, b in zip(self.components, other.components)))

    def dot(self, site: Site) -> float:
        return sum(c * n for c, n in zip(self.components, site.coords))


def neighbour_sum_factor(energy: float) -> float:
    """6 - 2E: for w != 0 the free Green function satisfies sum_e G(w + e) = factor * G(w)."""
    return (2 * DIM * HOPPING - energy) / HOPPING


def dispersion(p: Momentum | np.ndarray | tuple) -> float | np.ndarray:
    """e(p) = 2 sum_alpha sin^2(pi p_alpha), the symbol of -Delta/2."""
    if isinstance(p, Momentum):
        return 2.0 * sum(math.sin(math.pi * c) ** 2 for c in p.components)
    q1, q2, q3 = p
    return 2.0 * (np.sin(np.pi * q1) ** 2 + np.sin(np.pi * q2) ** 2 + np.sin(np.pi * q3) ** 2)


@dataclass(frozen=True)
class TorusGrid:
    """Uniform midpoint grid q_j = (j + 1/2)/M - 1/2 per axis, weight 1/M^3."""

    points: int = DEFAULT_GRID_POINTS

    def __post_init__(self):
        if self.points < 1:
            raise ValueError("grid needs at least one point per axis")

    @property
    def weight(self) -> float:
        return 1.0 / self.points**DIM

    def axis(self) -> np.ndarray:
        m = self.points
        return (np.arange(m) + 0.5) / m - 0.5

    def mesh(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        a = self.axis()
        return np.meshgrid(a, a, a, indexing="ij", sparse=True)

    def dispersion(self) -> np.ndarray:
        """e(q) on the full (M, M, M) grid."""
        s = 2.0 * np.sin(np.pi * self.axis()) ** 2
        return s[:, None, None] + s[None, :, None] + s[None, None, :]

    def refine(self) -> TorusGrid:
        return TorusGrid(2 * self.points)

    def ladder(self, levels: int = 3) -> list[TorusGrid]:
        grids = [self]
        for _ in range(levels - 1):
            grids.append(grids[-1].refine())
        return grids

    def point(self, index: tuple[int, int, int]) -> Momentum:
        a = self.axis()
        return Momentum(tuple(float(a[i]) for i in index))

    def integrate(self, values: np.ndarray) -> complex:
        """Uniform-weight sum of grid values (numpy pairwise summation)."""
        if not np.all(np.isfinite(values)):
            bad = tuple(int(i) for i in np.argwhere(~np.isfinite(values))[0])
            raise DomainError(f"non-finite integrand at grid point {bad} -> q={self.point(bad).components}")
        return complex(np.sum(values) * self.weight)

    def phase(self, offset: Site | np.ndarray) -> complex | np.ndarray:
        """prod_alpha exp(i pi w_alpha (1/M - 1)), the shift between FFT and midpoint grids."""
        w = np.asarray(offset.coords if isinstance(offset, Site) else offset)
        return np.exp(1j * np.pi * (1.0 / self.points - 1.0) * w.sum(axis=-1))

    def fourier_coefficients(self, values: np.ndarray, offsets: list[Site]) -> np.ndarray:
        """I(w) = int e^{i 2pi w.q} f(q) dq for each offset w, via one inverse FFT."""
        if not np.all(np.isfinite(values)):
            bad = tuple(int(i) for i in np.argwhere(~np.isfinite(values))[0])
            raise DomainError(f"non-finite integrand at grid point {bad} -> q={self.point(bad).components}")
        m = self.points
        spectrum = np.fft.ifftn(values)
        w = np.array([o.coords for o in offsets], dtype=np.int64).reshape(-1, DIM)
        if w.size and np.abs(w).max() >= m // 2:
            raise DomainError(f"offset radius {np.abs(w).max()} aliases on a grid with M={m}")
        idx = np.mod(w, m)
        return spectrum[idx[:, 0], idx[:, 1], idx[:, 2]] * self.phase(w)

    def synthesize(self, coefficients: dict[Site, complex]) -> np.ndarray:
        """f(q_j) = sum_k c_k e^{i 2pi k.q_j} on the grid."""
        m = self.points
        buf = np.zeros((m, m, m), dtype=complex)
        for k, c in coefficients.items():
            if k.sup_norm() >= m // 2:
                raise DomainError(f"coefficient offset {k} aliases on a grid with M={m}")
            buf[k.x % m, k.y % m, k.z % m] += c * self.phase(k)
        return np.fft.ifftn(buf) * m**DIM


def torus_quadrature(f: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray], grid: TorusGrid) -> complex:
    """Integrate f over T^3; f receives broadcastable coordinate arrays."""
    q1, q2, q3 = grid.mesh()
    values = np.broadcast_to(f(q1, q2, q3), (grid.points,) * DIM)
    return grid.integrate(values)


def quadrature_ladder(
    f: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray],
    grid: TorusGrid,
    levels: int = 3,
) -> list[tuple[int, complex]]:
    """Values of the quadrature on M, 2M, 4M, ... for convergence checks."""
    out = []
    for g in grid.ladder(levels):
        value = torus_quadrature(f, g)
        logger.debug("quadrature M=%d -> %s", g.points, value)
        out.append((g.points, value))
    return out


def ladder_converged(ladder: list[tuple[int, complex]], rtol: float = LADDER_RTOL) -> bool:
    """True when the last refinement moved the value by less than rtol (relative)."""
    if len(ladder) < 2:
        return False
    prev, last = ladder[-2][1], ladder[-1][1]
    return abs(last - prev) <= rtol * max(abs(last), 1e-300)
