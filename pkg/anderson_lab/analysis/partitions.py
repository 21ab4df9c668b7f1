"""Even-block partitions of expansion indices, cumulants and tadpole cancellation.

Index set: upsilon(N) = {1..N} u {N+2..2N+1}. A block {i, i+1} with both
indices present is a tadpole. All arithmetic on moments stays exact when the
moments are Fractions.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterator

import numpy as np

from ..core.errors import CombinatorialGuardError, PreconditionError
from ..core.lattice import Site
from ..disorder.densities import DisorderDensity
from ..disorder.sampling import sample_seed

logger = logging.getLogger(__name__)

MAX_PARTITION_N = 6
MAX_CANCELLATION_N = 4

Block = tuple[int, ...]


def upsilon(n: int) -> list[int]:
    if n < 1:
        raise PreconditionError(f"N must be >= 1, got {n}")
    return list(range(1, n + 1)) + list(range(n + 2, 2 * n + 2))


def is_tadpole(block: Block) -> bool:
    return len(block) == 2 and block[1] == block[0] + 1


@dataclass(frozen=True)
class Partition:
    """Disjoint even blocks covering an index set, blocks sorted by smallest element."""

    blocks: tuple[Block, ...]

    @property
    def tadpoles(self) -> tuple[bool, ...]:
        return tuple(is_tadpole(b) for b in self.blocks)

    @property
    def has_tadpole(self) -> bool:
        return any(self.tadpoles)

    @property
    def indices(self) -> list[int]:
        return sorted(i for b in self.blocks for i in b)

    def to_text(self) -> str:
        parts = []
        for b, tad in zip(self.blocks, self.tadpoles):
            parts.append("{" + ",".join(str(i) for i in b) + "}" + ("*" if tad else ""))
        return " ".join(parts)

    def __str__(self) -> str:
        return self.to_text()


def even_partitions(indices: list[int]) -> Iterator[Partition]:
    """Every partition of ``indices`` into blocks of even size.

    The block holding the smallest index is chosen first, so each partition is
    produced exactly once and the order is deterministic.
    """
    items = sorted(indices)
    if not items:
        yield Partition(())
        return
    if len(items) % 2:
        return
    head, rest = items[0], items[1:]
    for size in range(1, len(rest) + 1, 2):
        for mates in combinations(rest, size):
            block = (head, *mates)
            remaining = [i for i in rest if i not in mates]
            for tail in even_partitions(remaining):
                yield Partition((block, *tail.blocks))


def enumerate_partitions(n: int) -> list[Partition]:
    """All even-block partitions of upsilon(N), tadpole flags attached."""
    if n > MAX_PARTITION_N:
        raise CombinatorialGuardError(f"partition enumeration is limited to N <= {MAX_PARTITION_N}, got {n}")
    parts = list(even_partitions(upsilon(n)))
    logger.debug("N=%d: %d even partitions", n, len(parts))
    return parts


@dataclass
class CumulantTable:
    """Even cumulants c_{2l} of the single-site law, l = 1..l_max."""

    coefficients: dict[int, Fraction | float]
    moments: dict[int, Fraction | float] = field(default_factory=dict)

    def __getitem__(self, order: int):
        if order % 2:
            return 0
        return self.coefficients[order]

    @property
    def l_max(self) -> int:
        return max(self.coefficients) // 2

    @property
    def growth_constant(self) -> float:
        """Smallest c with |c_{2l}| <= (c l)^{2l+1} for every tabulated l."""
        worst = 0.0
        for order, c in self.coefficients.items():
            l = order // 2
            worst = max(worst, abs(float(c)) ** (1.0 / (order + 1)) / l)
        return worst


def cumulants_from_moments(moments: dict[int, Fraction | float], l_max: int) -> CumulantTable:
    """Invert m_{2l} = sum over even partitions of a 2l-set of prod c_{|block|}.

    Splitting off the block of the first element gives
    m_{2l} = sum_s C(2l-1, 2s-1) c_{2s} m_{2l-2s}.
    """
    if 2 not in moments or abs(float(moments[2]) - 1.0) > 1e-9:
        raise PreconditionError(f"moments must be normalized to m_2 = 1, got {moments.get(2)}")
    missing = [2 * l for l in range(1, l_max + 1) if 2 * l not in moments]
    if missing:
        raise PreconditionError(f"missing moments {missing}")
    m = {0: 1, **moments}
    c: dict[int, Fraction | float] = {}
    for l in range(1, l_max + 1):
        value = m[2 * l]
        for s in range(1, l):
            value -= math.comb(2 * l - 1, 2 * s - 1) * c[2 * s] * m[2 * l - 2 * s]
        c[2 * l] = value
    return CumulantTable(c, {k: v for k, v in moments.items() if k <= 2 * l_max})


def joint_moment(positions: list[Site], moments: dict[int, Fraction | float]) -> Fraction | float:
    """E[prod omega_{x_i}] for i.i.d. centered couplings: product over coincidence classes."""
    value: Fraction | float = 1
    for count in Counter(positions).values():
        if count % 2:
            return 0
        value *= moments[count] if count > 0 else 1
    return value


def _coincide(positions: dict[int, Site], block: Block) -> bool:
    first = positions[block[0]]
    return all(positions[i] == first for i in block[1:])


def partition_moment(positions: dict[int, Site], cumulants: CumulantTable) -> Fraction | float:
    """sum over all even partitions of prod c_{|S|} delta(x_S); equals the joint moment."""
    total: Fraction | float = 0
    for part in even_partitions(list(positions)):
        if all(_coincide(positions, b) for b in part.blocks):
            term: Fraction | float = 1
            for b in part.blocks:
                term *= cumulants[len(b)]
            total += term
    return total


def tadpole_collections(indices: list[int]) -> Iterator[tuple[Block, ...]]:
    """Every set of pairwise disjoint tadpoles {i, i+1} inside ``indices``, the empty set included."""
    present = set(indices)
    pairs = [(i, i + 1) for i in sorted(present) if i + 1 in present]

    def extend(start: int, chosen: tuple[Block, ...], used: set[int]):
        yield chosen
        for k in range(start, len(pairs)):
            a, b = pairs[k]
            if a in used or b in used:
                continue
            yield from extend(k + 1, (*chosen, pairs[k]), used | {a, b})

    yield from extend(0, (), set())


@dataclass
class CancellationResult:
    n: int
    lhs: Fraction | float
    rhs: Fraction | float
    transcript: list[str] = field(default_factory=list)

    @property
    def equal(self) -> bool:
        if isinstance(self.lhs, Fraction) and isinstance(self.rhs, Fraction):
            return self.lhs == self.rhs
        return abs(float(self.lhs) - float(self.rhs)) <= 1e-12 * max(1.0, abs(float(self.rhs)))

    def to_text(self) -> str:
        head = f"N={self.n} lhs={self.lhs} rhs={self.rhs} equal={self.equal}"
        return "\n".join([head, *self.transcript])


def tadpole_cancellation_check(
    n: int,
    positions: dict[int, Site],
    moments: dict[int, Fraction | float],
) -> CancellationResult:
    """Compare the tadpole-subtracted moment with the tadpole-free partition sum.

    lhs = sum over disjoint tadpole collections C of (-1)^|C| prod_C delta(x_i = x_{i+1})
          times E[prod of omega over the indices outside C];
    rhs = sum over tadpole-free even partitions of prod c_{|S|} delta(x_S).
    """
    if n > MAX_CANCELLATION_N:
        raise CombinatorialGuardError(f"cancellation check is limited to N <= {MAX_CANCELLATION_N}, got {n}")
    index_set = upsilon(n)
    if sorted(positions) != index_set:
        raise PreconditionError(f"positions must be keyed by {index_set}")
    cumulants = cumulants_from_moments(moments, n)

    transcript = []
    lhs: Fraction | float = 0
    for collection in tadpole_collections(index_set):
        if not all(_coincide(positions, pair) for pair in collection):
            continue
        used = {i for pair in collection for i in pair}
        rest = [positions[i] for i in index_set if i not in used]
        term = (-1) ** len(collection) * joint_moment(rest, moments)
        if term:
            label = " ".join("{%d,%d}" % pair for pair in collection) or "-"
            transcript.append(f"  C={label}: {term}")
        lhs += term

    rhs: Fraction | float = 0
    for part in enumerate_partitions(n):
        if part.has_tadpole or not all(_coincide(positions, b) for b in part.blocks):
            continue
        term: Fraction | float = 1
        for b in part.blocks:
            term *= cumulants[len(b)]
        if term:
            transcript.append(f"  pi={part.to_text()}: {term}")
        rhs += term
    return CancellationResult(n, lhs, rhs, transcript)


def coincidence_patterns(n: int) -> Iterator[dict[int, Site]]:
    """Every coincidence pattern of upsilon(N) as a position map (restricted growth strings)."""
    index_set = upsilon(n)
    size = len(index_set)

    def grow(prefix: list[int], top: int):
        if len(prefix) == size:
            yield {i: Site(label, 0, 0) for i, label in zip(index_set, prefix)}
            return
        for label in range(top + 2):
            yield from grow([*prefix, label], max(top, label))

    yield from grow([0], 0)


def sample_patterns(n: int, count: int, seed: int = 0, labels: int | None = None) -> list[dict[int, Site]]:
    """Random position maps; small label alphabets make coincidences frequent."""
    index_set = upsilon(n)
    rng = np.random.default_rng(seed)
    k = labels or max(2, n)
    draws = rng.integers(0, k, size=(count, len(index_set)))
    return [{i: Site(int(label), 0, 0) for i, label in zip(index_set, row)} for row in draws]


def mc_joint_moment(
    positions: dict[int, Site],
    density: DisorderDensity,
    samples: int,
    seed: int = 0,
) -> tuple[float, float]:
    """Monte Carlo E[prod omega_{x_i}] with its standard error."""
    distinct = sorted(set(positions.values()))
    column = {s: k for k, s in enumerate(distinct)}
    rng = np.random.default_rng(sample_seed(seed, 0))
    draws = density.ppf(rng.random((samples, len(distinct))))
    cols = [column[positions[i]] for i in sorted(positions)]
    products = np.prod(draws[:, cols], axis=1)
    stderr = float(products.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    return float(products.mean()), stderr
