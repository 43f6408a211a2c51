"""Sparse tensor-product index sets.

A d-dimensional basis function is indexed by a level vector ``m`` and a
translation vector.  The sparse set keeps every level vector with
``sum(m) <= k``; each level vector owns a dense block of
``prod(width[m_i])`` functions, stored consecutively in lexicographic order
of the level vectors.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator

import numpy as np

from .basis1d import level_sizes

__all__ = [
    "MultiIndex",
    "SparseIndexSet",
    "enumerate_sparse",
    "from_table_level",
    "level_vectors",
    "cardinality_formula",
    "anisotropic_count",
    "block_pairs",
]


@dataclass(frozen=True, order=True)
class MultiIndex:
    """Per-axis (level, translation) pairs.

    Translations follow the unified numbering: -5..6 at level 0 (scaling
    functions first), 1..6*2**j at level j.
    """

    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        for level, t in self.pairs:
            lo, hi = (-5, 6) if level == 0 else (1, 6 * 2**level)
            if level < 0 or not lo <= t <= hi:
                raise ValueError(f"translation {t} out of range at level {level}")

    @property
    def levels(self) -> tuple[int, ...]:
        return tuple(p[0] for p in self.pairs)

    @property
    def min_level(self) -> int:
        return min(self.levels)


def level_vectors(d: int, k: int) -> list[tuple[int, ...]]:
    """All level vectors with non-negative entries and ``sum <= k``, lexicographic."""
    if d < 1 or k < 0:
        raise ValueError("need d >= 1 and k >= 0")
    out: list[tuple[int, ...]] = []

    def rec(prefix, budget):
        if len(prefix) == d:
            out.append(tuple(prefix))
            return
        for m in range(budget + 1):
            rec(prefix + [m], budget - m)

    rec([], k)
    return out


@dataclass(frozen=True)
class SparseIndexSet:
    """Blocks of a sparse tensor-product basis.

    Parameters
    ----------
    d, k
        Dimension and sparse level (level-sum convention).
    widths
        Number of 1D functions at each level ``0..k``.
    """

    d: int
    k: int
    widths: tuple[int, ...]
    blocks: tuple[tuple[int, ...], ...] = field(init=False)
    offsets: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.widths) != self.k + 1:
            raise ValueError("need one width per level")
        blocks = tuple(level_vectors(self.d, self.k))
        sizes = [self.block_size(m) for m in blocks]
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "offsets", np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64))

    def block_size(self, m: tuple[int, ...]) -> int:
        return int(np.prod([self.widths[mi] for mi in m]))

    def block_shape(self, m: tuple[int, ...]) -> tuple[int, ...]:
        return tuple(self.widths[mi] for mi in m)

    @property
    def total_count(self) -> int:
        return int(self.offsets[-1])

    def __len__(self) -> int:
        return self.total_count

    def block_slice(self, i: int) -> slice:
        return slice(int(self.offsets[i]), int(self.offsets[i + 1]))

    def index_of(self, m: tuple[int, ...]) -> int:
        return self.blocks.index(tuple(m))

    def one_dim_offsets(self) -> np.ndarray:
        """Start of each level inside the 1D basis ordering."""
        return np.concatenate([[0], np.cumsum(self.widths)])

    def indices(self) -> Iterator[MultiIndex]:
        """Every multi-index in global order (slow; meant for tests and small sets)."""
        for m in self.blocks:
            ranges = [range(-5, -5 + self.widths[0]) if mi == 0 else range(1, self.widths[mi] + 1) for mi in m]
            for ts in itertools.product(*ranges):
                yield MultiIndex(tuple(zip(m, ts)))

    def contains(self, idx: MultiIndex) -> bool:
        m = idx.levels
        if len(m) != self.d or sum(m) > self.k:
            return False
        for level, t in idx.pairs:
            first = -5 if level == 0 else 1
            if not first <= t < first + self.widths[level]:
                return False
        return True


def enumerate_sparse(d: int, k: int) -> SparseIndexSet:
    """Sparse set with ``sum of levels <= k`` in the level-sum convention (level-0 width 12)."""
    return SparseIndexSet(d, k, tuple(level_sizes(k)))


def from_table_level(d: int, k_table: int) -> SparseIndexSet:
    """Sparse set in the results-table convention.

    Row ``k_table = 0`` is the scaling-only grid (``6**d`` functions); row
    ``k_table >= 1`` is the level-sum set at level ``k_table - 1``.
    """
    if k_table < 0:
        raise ValueError("k must be non-negative")
    if k_table == 0:
        return SparseIndexSet(d, 0, (6,))
    return enumerate_sparse(d, k_table - 1)


def cardinality_formula(d: int, k: int) -> int:
    """Closed-form size of the sparse set (level-sum convention)."""
    if k < 0:
        raise ValueError("k must be non-negative")
    k_ = Fraction(k)
    if d == 2:
        val = 6**2 * (k_ + 2) * 2 ** (k + 1)
    elif d == 3:
        val = 6**3 * (k_**2 + 7 * k_ + 8) * 2**k
    elif d == 4:
        val = 6**4 * (k_**3 / 6 + Fraction(5, 2) * k_**2 + Fraction(28, 3) * k_ + 8) * 2 ** (k + 1)
    elif d == 5:
        val = 6**5 * (
            k_**4 / 24 + Fraction(13, 12) * k_**3 + Fraction(203, 24) * k_**2 + Fraction(269, 12) * k_ + 16
        ) * 2 ** (k + 1)
    else:
        raise ValueError(f"no closed form for d={d}")
    if val.denominator != 1:
        raise ArithmeticError("closed form did not evaluate to an integer")
    return int(val)


def anisotropic_count(d: int, k: int) -> int:
    """Size ``6**d * 2**(d*k)`` of the full tensor-product basis."""
    if d < 1 or k < 0:
        raise ValueError("need d >= 1 and k >= 0")
    return 6**d * 2 ** (d * k)


def block_pairs(s: SparseIndexSet) -> Iterator[tuple[tuple[int, ...], tuple[int, ...]]]:
    """All ordered pairs of level vectors of ``s``."""
    for m in s.blocks:
        for n in s.blocks:
            yield m, n
