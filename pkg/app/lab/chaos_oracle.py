# app/lab/chaos_oracle.py
"""Brute-force combinatorial oracles for the MP means.

Row paths (b_1..b_lam) start away from the anchor factor a and never repeat a
row twice in a row; column paths (j_1..j_lam) start at the anchor variable i
with the same adjacency rule. Paths are generated depth first, never stored.
"""
from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass

import numpy as np

from ..core.config import settings
from ..core.errors import ChaosCapError
from .ensemble import ProblemInstance
from .laws.loader import create_entry_law
from .schedule import VarianceSchedule
from .seeding import rng_for

log = logging.getLogger(__name__)

MAX_WICK_NODES = 12


def _walks(size: int, length: int, first: Sequence[int]) -> Iterator[tuple[int, ...]]:
    """Tuples of ``length`` indices in [0, size) with distinct neighbours."""
    if length == 0:
        yield ()
        return

    def extend(prefix: tuple[int, ...]) -> Iterator[tuple[int, ...]]:
        if len(prefix) == length:
            yield prefix
            return
        for k in range(size):
            if k != prefix[-1]:
                yield from extend((*prefix, k))

    for start in first:
        yield from extend((start,))


@dataclass(frozen=True)
class ChaosIndexSets:
    lam: int
    anchor_row: int
    anchor_col: int
    m: int
    n: int

    def rows(self) -> Iterator[tuple[int, ...]]:
        return _walks(self.m, self.lam, [b for b in range(self.m) if b != self.anchor_row])

    def cols(self) -> Iterator[tuple[int, ...]]:
        return _walks(self.n, self.lam, [self.anchor_col])

    def row_count(self) -> int:
        return (self.m - 1) ** self.lam

    def col_count(self) -> int:
        return (self.n - 1) ** (self.lam - 1)


# --------------------------
# Path weights
# --------------------------
def path_weight(inst: ProblemInstance, rows: Sequence[int], i: int) -> float:
    """f(b) = y_{b_lam} * sum over column paths from i of the A-product.

    The column sum is done by a leave-one-out transfer: after step iota the
    weight vector w[j] collects all paths ending at column j.
    """
    a = inst.a
    w = np.zeros(inst.n)
    w[i] = a[rows[0], i]
    for b_prev, b_next in itertools.pairwise(rows):
        w = (w.sum() - w) * a[b_prev] * a[b_next]
    return float(inst.y[rows[-1]] * w.sum())


def path_weight_naive(inst: ProblemInstance, rows: Sequence[int], i: int) -> float:
    a, lam = inst.a, len(rows)
    total = 0.0
    for cols in _walks(inst.n, lam, [i]):
        term = a[rows[0], cols[0]]
        for iota in range(lam - 1):
            term *= a[rows[iota], cols[iota + 1]] * a[rows[iota + 1], cols[iota + 1]]
        total += term
    return float(inst.y[rows[-1]] * total)


def _check_cap(count: int) -> None:
    if count > settings.chaos_term_cap:
        raise ChaosCapError(f"{count} terms exceed the cap of {settings.chaos_term_cap}")


def chaos_terms(inst: ProblemInstance, t: int, i: int, a: int) -> list[float]:
    """Unweighted per-lambda sums sum_B sum_J (lambda = 1..t)."""
    _check_cap(sum((inst.m - 1) ** lam * (inst.n - 1) ** (lam - 1) for lam in range(1, t + 1)))
    out = []
    for lam in range(1, t + 1):
        sets = ChaosIndexSets(lam, a, i, inst.m, inst.n)
        out.append(math.fsum(path_weight(inst, rows, i) for rows in sets.rows()))
    return out


def chaos_mean(inst: ProblemInstance, sched: VarianceSchedule, t: int, i: int, a: int) -> float:
    if t < 1:
        return 0.0
    terms = chaos_terms(inst, t, i, a)
    return math.fsum(
        (-1) ** (lam + 1) * sched.gamma_lambda(t, lam) * s
        for lam, s in enumerate(terms, start=1)
    )


# --------------------------
# Inclusion-exclusion split
# --------------------------
def _pinned_walks(m: int, lam: int, anchor: int, pinned: frozenset[int]) -> Iterator[tuple[int, ...]]:
    """All b in [m]^lam with b_alpha = b_{alpha-1} for alpha in ``pinned`` (b_0 = anchor)."""

    def extend(prefix: tuple[int, ...]) -> Iterator[tuple[int, ...]]:
        alpha = len(prefix) + 1
        if alpha > lam:
            yield prefix
            return
        if alpha in pinned:
            yield from extend((*prefix, prefix[-1] if prefix else anchor))
        else:
            for k in range(m):
                yield from extend((*prefix, k))

    yield from extend(())


@dataclass(frozen=True)
class XZSplit:
    x_part: float
    z_part: float
    x_terms: tuple[float, ...]
    z_terms: tuple[float, ...]


def decompose_xz(inst: ProblemInstance, sched: VarianceSchedule, t: int, i: int, a: int) -> XZSplit:
    """Expand prod_alpha (1 - 1{b_alpha = b_{alpha-1}}) over pinned position sets.

    Sets without position 1 never look at a and make up x; the rest make up z.
    """
    m = inst.m
    _check_cap(sum(2**lam * m**lam * (inst.n - 1) ** (lam - 1) for lam in range(1, t + 1)))
    cache: dict[tuple[int, ...], float] = {}

    def f(rows: tuple[int, ...]) -> float:
        if rows not in cache:
            cache[rows] = path_weight(inst, rows, i)
        return cache[rows]

    x_terms, z_terms = [], []
    for lam in range(1, t + 1):
        xs, zs = [], []
        for size in range(lam + 1):
            for pinned in itertools.combinations(range(1, lam + 1), size):
                sign = (-1) ** size
                pinned_set = frozenset(pinned)
                total = math.fsum(f(rows) for rows in _pinned_walks(m, lam, a, pinned_set))
                (zs if 1 in pinned_set else xs).append(sign * total)
        x_terms.append(math.fsum(xs))
        z_terms.append(math.fsum(zs))

    weights = [(-1) ** (lam + 1) * sched.gamma_lambda(t, lam) for lam in range(1, t + 1)]
    return XZSplit(
        x_part=math.fsum(w * x for w, x in zip(weights, x_terms, strict=True)),
        z_part=math.fsum(w * z for w, z in zip(weights, z_terms, strict=True)),
        x_terms=tuple(x_terms),
        z_terms=tuple(z_terms),
    )


def remainder_z(inst: ProblemInstance, sched: VarianceSchedule, t: int, i: int) -> float:
    """Z_i = sum_b sum_{j != i} A_bi A_bj Y_{b->j}."""
    total = []
    for b in range(inst.m):
        for j in range(inst.n):
            if j != i:
                y_bj = decompose_xz(inst, sched, t, j, b).z_part
                total.append(inst.a[b, i] * inst.a[b, j] * y_bj)
    return math.fsum(total)


# --------------------------
# Wick pairings
# --------------------------
def pairings(items: Sequence[int]) -> Iterator[list[tuple[int, int]]]:
    items = list(items)
    if not items:
        yield []
        return
    first = items.pop(0)
    for k, other in enumerate(items):
        for rest in pairings(items[:k] + items[k + 1:]):
            yield [(first, other), *rest]


def pairing_count(nodes: int) -> int:
    """(2k - 1)!! for 2k nodes, 0 for odd counts."""
    if nodes % 2:
        return 0
    return math.prod(range(nodes - 1, 0, -2))


@dataclass(frozen=True)
class PairingTable:
    nodes: tuple[int, ...]
    pairings: tuple[tuple[tuple[int, int], ...], ...]

    @classmethod
    def build(cls, labels: Sequence[int]) -> PairingTable:
        nodes = tuple(labels)
        return cls(nodes=nodes, pairings=tuple(tuple(p) for p in pairings(range(len(nodes)))))


def node_covariance(labels: Sequence[int], base_cov: np.ndarray | None = None) -> np.ndarray:
    """Covariance between factor nodes carrying the given variable labels."""
    labels = np.asarray(labels, dtype=int)
    if base_cov is None:
        return (labels[:, None] == labels[None, :]).astype(float)
    base_cov = np.asarray(base_cov, dtype=float)
    return base_cov[np.ix_(labels, labels)]


def wick_expectation(cov: np.ndarray) -> float:
    cov = np.asarray(cov, dtype=float)
    k = cov.shape[0]
    if cov.shape != (k, k) or not np.allclose(cov, cov.T):
        raise ValueError("covariance must be a symmetric square matrix")
    if k % 2:
        return 0.0
    if k > MAX_WICK_NODES:
        raise ValueError(f"at most {MAX_WICK_NODES} nodes supported, got {k}")
    return math.fsum(math.prod(cov[p, q] for p, q in pairing) for pairing in pairings(range(k)))


# --------------------------
# Off-diagonal chaos in L2
# --------------------------
@dataclass(frozen=True)
class L2Comparison:
    family_a: str
    family_b: str
    r: int
    m: int
    l2_a: float
    se_a: float
    l2_b: float
    se_b: float


def chaos_values(xi: np.ndarray, r: int) -> np.ndarray:
    """chi_r = m^{-r/2} sum over index paths with distinct neighbours, row-wise."""
    m = xi.shape[-1]
    w = xi.copy()
    for _ in range(r - 1):
        w = xi * (w.sum(axis=-1, keepdims=True) - w)
    return w.sum(axis=-1) / m ** (r / 2.0)


def chaos_l2_gaussian(r: int, m: int) -> float:
    """Exact E[chi_r^2] for standard Gaussian entries by pairing enumeration."""
    total = []
    paths = list(_walks(m, r, range(m)))
    for left in paths:
        for right in paths:
            total.append(wick_expectation(node_covariance(left + right)))
    return math.fsum(total) / m**r


def chaos_l2_compare(
    family_a: str,
    family_b: str,
    r: int,
    m: int,
    trials: int,
    seed: int = 0,
    batch: int = 20_000,
) -> L2Comparison:
    if not 1 <= r <= 4:
        raise ValueError(f"chaos order must be in 1..4, got {r}")
    if not 2 <= m <= 64:
        raise ValueError(f"m must be in 2..64, got {m}")
    if trials < 1000:
        raise ValueError(f"need at least 1000 trials, got {trials}")

    def estimate(family: str, stream: int) -> tuple[float, float]:
        law, rng = create_entry_law(family), rng_for(seed, stream)
        sq = []
        for start in range(0, trials, batch):
            size = min(batch, trials - start)
            sq.append(chaos_values(law.sample(rng, (size, m)), r) ** 2)
        sq = np.concatenate(sq)
        return float(sq.mean()), float(sq.std(ddof=1) / np.sqrt(trials))

    l2_a, se_a = estimate(family_a, 1)
    l2_b, se_b = estimate(family_b, 2)
    log.info("chaos r=%d m=%d: %s %.4f+-%.4f, %s %.4f+-%.4f",
             r, m, family_a, l2_a, se_a, family_b, l2_b, se_b)
    return L2Comparison(family_a, family_b, r, m, l2_a, se_a, l2_b, se_b)
