"""Piecewise cubic polynomials with exact inner products.

Every scaling function and wavelet in this package is a compactly supported
cubic spline, stored as a :class:`PiecewisePoly`.  Coefficients are kept per
piece in the *local* variable ``s = x - t_i`` (highest degree first), which
keeps dyadic dilations exact: ``p(2**j x - m)`` only multiplies the degree-k
coefficient by ``2**(j*k)``.  Conversion to and from global-coordinate
coefficients (the layout of published coefficient tables) is provided by
:meth:`PiecewisePoly.from_global` and :meth:`PiecewisePoly.global_coefficients`.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "PiecewisePoly",
    "QuadratureRule",
    "gauss_legendre",
    "evaluate",
    "derivative",
    "inner_product",
    "rescale",
    "linear_combination",
    "hermite_generators",
    "BREAK_TOL",
]

#: absolute tolerance used when merging breakpoint sets
BREAK_TOL = 1e-14


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre rule on the reference interval [-1, 1]."""

    nodes: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return len(self.nodes)

    def mapped(self, a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and weights on each interval ``[a_i, b_i]``, shape (n_int, size)."""
        a = np.asarray(a, dtype=float)[:, None]
        b = np.asarray(b, dtype=float)[:, None]
        half = 0.5 * (b - a)
        x = a + half * (self.nodes[None, :] + 1.0)
        w = half * self.weights[None, :]
        return x, w


@lru_cache(maxsize=None)
def gauss_legendre(n: int = 4) -> QuadratureRule:
    """Return the ``n``-point Gauss-Legendre rule (exact to degree ``2n-1``)."""
    if n < 1:
        raise ValueError("need at least one node")
    x, w = np.polynomial.legendre.leggauss(n)
    x.flags.writeable = False
    w.flags.writeable = False
    return QuadratureRule(x, w)


def _taylor_shift(c: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Coefficients of ``p(s + h)`` given those of ``p(s)``; rows are cubics."""
    c3, c2, c1, c0 = c[..., 0], c[..., 1], c[..., 2], c[..., 3]
    return np.stack(
        [
            c3,
            3.0 * c3 * h + c2,
            (3.0 * c3 * h + 2.0 * c2) * h + c1,
            ((c3 * h + c2) * h + c1) * h + c0,
        ],
        axis=-1,
    )


class PiecewisePoly:
    """Compactly supported piecewise cubic on ``breaks[0] < ... < breaks[-1]``.

    Parameters
    ----------
    breaks : array_like, shape (n+1,)
        Strictly increasing breakpoints.
    coefs : array_like, shape (n, 4)
        Per-piece coefficients ``(c3, c2, c1, c0)`` of the local polynomial
        ``c3 s**3 + c2 s**2 + c1 s + c0`` with ``s = x - breaks[i]``.

    Outside ``[breaks[0], breaks[-1]]`` the function is zero.  At interior
    breakpoints the right piece is used; at the right end point the last piece.
    Instances are immutable.
    """

    __slots__ = ("_breaks", "_coefs")

    def __init__(self, breaks: Sequence[float], coefs: Sequence[Sequence[float]]):
        breaks = np.array(breaks, dtype=float)
        coefs = np.array(coefs, dtype=float).reshape(-1, 4)
        if breaks.ndim != 1 or len(breaks) < 2:
            raise ValueError("need at least two breakpoints")
        if len(coefs) != len(breaks) - 1:
            raise ValueError(
                f"{len(breaks) - 1} pieces expected, got {len(coefs)} coefficient rows"
            )
        if np.any(np.diff(breaks) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        breaks.flags.writeable = False
        coefs.flags.writeable = False
        self._breaks = breaks
        self._coefs = coefs

    # -- construction -----------------------------------------------------
    @classmethod
    def from_global(cls, breaks, global_coefs) -> "PiecewisePoly":
        """Build from coefficients of ``x**3, x**2, x, 1`` in the global variable."""
        breaks = np.asarray(breaks, dtype=float)
        g = np.asarray(global_coefs, dtype=float).reshape(-1, 4)
        return cls(breaks, _taylor_shift(g, breaks[:-1]))

    @classmethod
    def zero(cls, a: float = 0.0, b: float = 1.0) -> "PiecewisePoly":
        return cls([a, b], [[0.0, 0.0, 0.0, 0.0]])

    # -- accessors --------------------------------------------------------
    @property
    def breaks(self) -> np.ndarray:
        return self._breaks

    @property
    def coefs(self) -> np.ndarray:
        return self._coefs

    @property
    def support(self) -> tuple[float, float]:
        return float(self._breaks[0]), float(self._breaks[-1])

    @property
    def n_pieces(self) -> int:
        return len(self._coefs)

    def global_coefficients(self) -> np.ndarray:
        """Per-piece coefficients of ``x**3, x**2, x, 1`` in the global variable."""
        return _taylor_shift(self._coefs, -self._breaks[:-1])

    def __repr__(self) -> str:
        a, b = self.support
        return f"PiecewisePoly(support=[{a:g}, {b:g}], pieces={self.n_pieces})"

    # -- evaluation -------------------------------------------------------
    def _piece_index(self, x: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self._breaks, x, side="right") - 1
        idx = np.where(x == self._breaks[-1], self.n_pieces - 1, idx)
        return idx

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        idx = self._piece_index(x)
        inside = (idx >= 0) & (idx < self.n_pieces)
        safe = np.clip(idx, 0, self.n_pieces - 1)
        c = self._coefs[safe]
        s = x - self._breaks[safe]
        val = ((c[..., 0] * s + c[..., 1]) * s + c[..., 2]) * s + c[..., 3]
        out = np.where(inside, val, 0.0)
        return float(out) if out.ndim == 0 else out

    # -- algebra ----------------------------------------------------------
    def derivative(self) -> "PiecewisePoly":
        c = self._coefs
        d = np.stack([np.zeros(len(c)), 3.0 * c[:, 0], 2.0 * c[:, 1], c[:, 2]], axis=1)
        return PiecewisePoly(self._breaks, d)

    def affine(self, scale: float, shift: float) -> "PiecewisePoly":
        """Return ``x -> p(scale * x - shift)`` for ``scale > 0``."""
        if scale <= 0:
            raise ValueError("scale must be positive")
        breaks = (self._breaks + shift) / scale
        powers = scale ** np.arange(3, -1, -1, dtype=float)
        return PiecewisePoly(breaks, self._coefs * powers)

    def rescale(self, j: int, m: int) -> "PiecewisePoly":
        """Return ``2**(j/2) p(2**j x - m)``; preserves the L2 norm."""
        if j < 0:
            raise ValueError("level must be non-negative")
        return self.affine(2.0**j, float(m)) * (2.0 ** (0.5 * j))

    def shift(self, t: float) -> "PiecewisePoly":
        """Return ``x -> p(x - t)``."""
        return PiecewisePoly(self._breaks + t, self._coefs)

    def refine(self, breaks: np.ndarray) -> "PiecewisePoly":
        """Re-express on a superset of breakpoints covering the support.

        Pieces of the refined grid outside the current support get zero
        coefficients.  ``breaks`` must contain every current breakpoint.
        """
        breaks = np.asarray(breaks, dtype=float)
        mids = 0.5 * (breaks[:-1] + breaks[1:])
        idx = np.searchsorted(self._breaks, mids, side="right") - 1
        inside = (idx >= 0) & (idx < self.n_pieces)
        safe = np.clip(idx, 0, self.n_pieces - 1)
        c = _taylor_shift(self._coefs[safe], breaks[:-1] - self._breaks[safe])
        c[~inside] = 0.0
        return PiecewisePoly(breaks, c)

    def restrict(self, a: float, b: float) -> "PiecewisePoly":
        """Multiply by the characteristic function of ``[a, b]``."""
        lo, hi = self.support
        lo, hi = max(lo, a), min(hi, b)
        if hi <= lo:
            return PiecewisePoly.zero(a, b)
        inner = self._breaks[(self._breaks > lo) & (self._breaks < hi)]
        grid = np.concatenate([[lo], inner, [hi]])
        return self.refine(grid)

    def trim(self, tol: float = 0.0) -> "PiecewisePoly":
        """Drop leading and trailing pieces whose coefficients are all ``<= tol``."""
        nz = np.flatnonzero(np.max(np.abs(self._coefs), axis=1) > tol)
        if len(nz) == 0:
            return PiecewisePoly.zero(*self.support)
        return PiecewisePoly(self._breaks[nz[0] : nz[-1] + 2], self._coefs[nz[0] : nz[-1] + 1])

    def __mul__(self, alpha: float) -> "PiecewisePoly":
        return PiecewisePoly(self._breaks, self._coefs * float(alpha))

    __rmul__ = __mul__

    def __truediv__(self, alpha: float) -> "PiecewisePoly":
        return self * (1.0 / float(alpha))

    def __neg__(self) -> "PiecewisePoly":
        return self * -1.0

    def __add__(self, other: "PiecewisePoly") -> "PiecewisePoly":
        return linear_combination([1.0, 1.0], [self, other])

    def __sub__(self, other: "PiecewisePoly") -> "PiecewisePoly":
        return linear_combination([1.0, -1.0], [self, other])

    # -- inner products ---------------------------------------------------
    def dot(self, other: "PiecewisePoly") -> float:
        return inner_product(self, other)

    def norm(self) -> float:
        return float(np.sqrt(max(inner_product(self, self), 0.0)))

    def moment(self, m: int) -> float:
        """Return ``∫ x**m p(x) dx`` (exact for ``m <= 4``)."""
        a, b = self._breaks[:-1], self._breaks[1:]
        x, w = gauss_legendre(4).mapped(a, b)
        return float(np.sum(w * x**m * self(x)))


def merge_breaks(*arrays: Iterable[float], tol: float = BREAK_TOL) -> np.ndarray:
    """Sorted union of breakpoint sets, fusing values closer than ``tol``."""
    allb = np.sort(np.concatenate([np.asarray(a, dtype=float) for a in arrays]))
    keep = np.concatenate([[True], np.diff(allb) > tol])
    return allb[keep]


def linear_combination(weights: Sequence[float], polys: Sequence[PiecewisePoly]) -> PiecewisePoly:
    """Return ``sum_i weights[i] * polys[i]`` on the merged breakpoint set."""
    if len(weights) != len(polys) or not polys:
        raise ValueError("weights and polys must be non-empty and of equal length")
    lo = min(p.support[0] for p in polys)
    hi = max(p.support[1] for p in polys)
    grid = merge_breaks(*(p.breaks for p in polys), [lo, hi])
    coefs = np.zeros((len(grid) - 1, 4))
    for w, p in zip(weights, polys):
        if w != 0.0:
            coefs += float(w) * p.refine(grid).coefs
    return PiecewisePoly(grid, coefs)


def inner_product(p: PiecewisePoly, q: PiecewisePoly, rule: QuadratureRule | None = None) -> float:
    """Exact L2 inner product of two piecewise cubics.

    The breakpoint sets are merged over the intersection of the supports and
    a 4-point Gauss rule is applied on every merged subinterval, which
    integrates the degree-6 products exactly.
    """
    lo = max(p.support[0], q.support[0])
    hi = min(p.support[1], q.support[1])
    if hi <= lo:
        return 0.0
    grid = merge_breaks(
        p.breaks[(p.breaks > lo) & (p.breaks < hi)],
        q.breaks[(q.breaks > lo) & (q.breaks < hi)],
        [lo, hi],
    )
    x, w = (rule or gauss_legendre(4)).mapped(grid[:-1], grid[1:])
    return float(np.sum(w * p(x) * q(x)))


# functional aliases matching the operation names used elsewhere
def evaluate(p: PiecewisePoly, x):
    return p(x)


def derivative(p: PiecewisePoly) -> PiecewisePoly:
    return p.derivative()


def rescale(p: PiecewisePoly, j: int, m: int) -> PiecewisePoly:
    return p.rescale(j, m)


def hermite_generators() -> tuple[PiecewisePoly, PiecewisePoly]:
    """The C1 Hermite cubic generators ``xi_1`` (value) and ``xi_2`` (slope) on [-1, 1]."""
    # (x+1)^2 (1-2x) = -2x^3 - 3x^2 + 1 ;  (1-x)^2 (1+2x) = 2x^3 - 3x^2 + 1
    xi1 = PiecewisePoly.from_global([-1.0, 0.0, 1.0], [[-2.0, -3.0, 0.0, 1.0], [2.0, -3.0, 0.0, 1.0]])
    # (x+1)^2 x = x^3 + 2x^2 + x ;  (1-x)^2 x = x^3 - 2x^2 + x
    xi2 = PiecewisePoly.from_global([-1.0, 0.0, 1.0], [[1.0, 2.0, 1.0, 0.0], [1.0, -2.0, 1.0, 0.0]])
    return xi1, xi2
