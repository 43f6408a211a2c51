"""Matrix-free Galerkin operators on sparse tensor-product wavelet spaces.

Because the basis is L2-orthonormal the discrete operator is

    alpha * I + beta * G,   G = sum_i P_ii M_i - 2 sum_{i<j} P_ij B_i B_j,

where ``M_i`` (``B_i``) is the 1D stiffness (advection) matrix acting on axis
``i``.  Each term is applied fibre by fibre: fixing the levels on all other
axes leaves a 1D level range ``0..L`` along the active axis, and the
concatenated blocks of that fibre are hit with the leading ``N(L) x N(L)``
corner of the 1D matrix.  Mixed terms ``B_i B_j`` are split into the parts
of ``B_i`` that raise and that do not raise the level; applying them in the
right order keeps every intermediate inside the sparse set, so the result is
exact.
"""
from __future__ import annotations

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .basis1d import Basis1D
from .sparsegrid import SparseIndexSet
from .splinekit import gauss_legendre

__all__ = [
    "LevelBlock",
    "OneDimMatrices",
    "assemble_level_blocks",
    "one_dim_matrices",
    "BlockOperator",
    "crank_nicolson_pair",
    "project_payoff",
    "evaluate_expansion",
    "save_blocks",
    "load_blocks",
]


@dataclass(frozen=True)
class LevelBlock:
    """1D stiffness and advection entries between levels ``m`` (rows) and ``n``."""

    m: int
    n: int
    M: np.ndarray
    B: np.ndarray


@dataclass(frozen=True)
class OneDimMatrices:
    """Full 1D matrices of a basis, with the level of every row."""

    I: np.ndarray
    M: np.ndarray
    B: np.ndarray
    levels: np.ndarray
    offsets: np.ndarray

    @property
    def size(self) -> int:
        return self.M.shape[0]

    def block(self, m: int, n: int) -> LevelBlock:
        rs = slice(self.offsets[m], self.offsets[m + 1])
        cs = slice(self.offsets[n], self.offsets[n + 1])
        return LevelBlock(m, n, self.M[rs, cs], self.B[rs, cs])


def one_dim_matrices(b: Basis1D, widths=None, check: float = 1e-8) -> OneDimMatrices:
    """Assemble the 1D matrices of ``b`` grouped by the level ``widths``."""
    widths = list(b.sizes if widths is None else widths)
    I, M, B = b.matrices()
    n = sum(widths)
    I, M, B = I[:n, :n], M[:n, :n], B[:n, :n]
    dev = np.max(np.abs(I - np.eye(n)))
    if dev > check:
        raise ValueError(f"mass matrix deviates from the identity by {dev:.2e}")
    levels = np.repeat(np.arange(len(widths)), widths)
    offsets = np.concatenate([[0], np.cumsum(widths)])
    return OneDimMatrices(I, M, B, levels, offsets)


def assemble_level_blocks(b: Basis1D, k: int | None = None) -> dict[tuple[int, int], LevelBlock]:
    """All level blocks ``(m, n)`` with ``0 <= m, n <= k``."""
    k = b.max_level if k is None else k
    mats = one_dim_matrices(b, b.sizes[: k + 1])
    return {(m, n): mats.block(m, n) for m in range(k + 1) for n in range(k + 1)}


# ---------------------------------------------------------------------------
# block cache
# ---------------------------------------------------------------------------
def save_blocks(path: str | Path, mats: OneDimMatrices, key: str) -> None:
    """Write the 1D matrices as ``.npz`` (one array per level block), atomically."""
    arrays = {"key": np.array(key), "offsets": mats.offsets}
    nlev = len(mats.offsets) - 1
    for m in range(nlev):
        for n in range(nlev):
            blk = mats.block(m, n)
            arrays[f"M_{m}_{n}"] = blk.M
            arrays[f"B_{m}_{n}"] = blk.B
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp.npz")
    np.savez(tmp, **arrays)
    os.replace(tmp, path)


def load_blocks(path: str | Path, key: str) -> OneDimMatrices | None:
    """Read a block cache; ``None`` if missing, unreadable or keyed differently."""
    try:
        with np.load(path) as data:
            if str(data["key"]) != key:
                return None
            offsets = data["offsets"]
            nlev = len(offsets) - 1
            n = int(offsets[-1])
            M = np.zeros((n, n))
            B = np.zeros((n, n))
            for m in range(nlev):
                for q in range(nlev):
                    rs = slice(offsets[m], offsets[m + 1])
                    cs = slice(offsets[q], offsets[q + 1])
                    M[rs, cs] = data[f"M_{m}_{q}"]
                    B[rs, cs] = data[f"B_{m}_{q}"]
    except (OSError, KeyError, ValueError):
        return None
    levels = np.repeat(np.arange(nlev), np.diff(offsets))
    return OneDimMatrices(np.eye(n), M, B, levels, offsets)


def blocks_key(fingerprint: str, widths) -> str:
    return hashlib.sha256(f"{fingerprint}|{tuple(widths)}".encode()).hexdigest()[:24]


# ---------------------------------------------------------------------------
# matrix-free apply
# ---------------------------------------------------------------------------
def _mode_mult(A: np.ndarray, X: np.ndarray, axis: int) -> np.ndarray:
    return np.moveaxis(np.tensordot(A, X, axes=([1], [axis])), 0, axis)


@dataclass
class _Fibre:
    blocks: list[int]
    cuts: list[int]
    size: int


class BlockOperator:
    """``alpha * I + beta * G`` on a sparse index set, applied matrix-free.

    Parameters
    ----------
    s : SparseIndexSet
    mats : OneDimMatrices
        1D matrices whose level grouping matches ``s.widths``.
    P : (d, d) array
        Diffusion coefficients on the unit cube.
    alpha, beta : float
    threads : int
        Worker threads for the independent Kronecker terms.
    """

    def __init__(self, s: SparseIndexSet, mats: OneDimMatrices, P, alpha: float, beta: float, threads: int = 1):
        P = np.atleast_2d(np.asarray(P, dtype=float))
        if P.shape != (s.d, s.d):
            raise ValueError("P has the wrong shape")
        n1 = int(sum(s.widths))
        if mats.size < n1 or list(np.diff(mats.offsets[: s.k + 2])) != list(s.widths):
            raise ValueError("1D matrices do not match the index set")
        self.s = s
        self.P = P
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.threads = max(1, int(threads))
        self.M = mats.M[:n1, :n1]
        B = mats.B[:n1, :n1]
        lev = mats.levels[:n1]
        raise_mask = lev[:, None] > lev[None, :]
        self.B = B
        self.B_up = np.where(raise_mask, B, 0.0)  # row level above column level
        self.B_keep = B - self.B_up
        self._shapes = [s.block_shape(m) for m in s.blocks]
        self._fibres = [self._build_fibres(axis) for axis in range(s.d)]

    @property
    def shape(self) -> tuple[int, int]:
        n = self.s.total_count
        return n, n

    def with_coefficients(self, alpha: float, beta: float) -> "BlockOperator":
        """Same index set and matrices, different scalars."""
        other = object.__new__(BlockOperator)
        other.__dict__.update(self.__dict__)
        other.alpha, other.beta = float(alpha), float(beta)
        return other

    def _build_fibres(self, axis: int) -> list[_Fibre]:
        s = self.s
        groups: dict[tuple[int, ...], list[tuple[int, int]]] = {}
        for b, m in enumerate(s.blocks):
            rest = m[:axis] + m[axis + 1 :]
            groups.setdefault(rest, []).append((m[axis], b))
        fibres = []
        for rest in sorted(groups):
            members = sorted(groups[rest])
            widths = [s.widths[level] for level, _ in members]
            fibres.append(_Fibre([b for _, b in members], list(np.cumsum(widths)[:-1]), int(sum(widths))))
        return fibres

    def _blocks(self, v: np.ndarray) -> list[np.ndarray]:
        s = self.s
        return [v[s.block_slice(b)].reshape(self._shapes[b]) for b in range(len(s.blocks))]

    def axis_apply(self, v: np.ndarray, axis: int, mat: np.ndarray) -> np.ndarray:
        """Apply a 1D matrix along ``axis``, restricted to the sparse set."""
        out = np.empty_like(v)
        vb = self._blocks(v)
        ob = self._blocks(out)
        for f in self._fibres[axis]:
            if len(f.blocks) == 1:
                b = f.blocks[0]
                ob[b][...] = _mode_mult(mat[: f.size, : f.size], vb[b], axis)
                continue
            X = np.concatenate([vb[b] for b in f.blocks], axis=axis)
            Y = _mode_mult(mat[: f.size, : f.size], X, axis)
            for b, part in zip(f.blocks, np.split(Y, f.cuts, axis=axis)):
                ob[b][...] = part
        return out

    def _terms(self) -> list[Callable[[np.ndarray], np.ndarray]]:
        terms = []
        d = self.s.d
        for i in range(d):
            if self.P[i, i] != 0.0:
                terms.append(lambda v, i=i: self.P[i, i] * self.axis_apply(v, i, self.M))
        for i in range(d):
            for j in range(i + 1, d):
                pij = self.P[i, j] + self.P[j, i]
                if pij == 0.0:
                    continue

                def cross(v, i=i, j=j, pij=pij):
                    # B_i = B_up + B_keep; B_up raises the level on axis i
                    t1 = self.axis_apply(self.axis_apply(v, j, self.B), i, self.B_up)
                    t2 = self.axis_apply(self.axis_apply(v, i, self.B_keep), j, self.B)
                    return -pij * (t1 + t2)

                terms.append(cross)
        return terms

    def apply_G(self, v: np.ndarray) -> np.ndarray:
        """The second-order part ``G v``."""
        v = np.asarray(v, dtype=float)
        if v.shape != (self.s.total_count,):
            raise ValueError(f"expected a vector of length {self.s.total_count}, got {v.shape}")
        terms = self._terms()
        if not terms:
            return np.zeros_like(v)
        if self.threads > 1 and len(terms) > 1:
            with ThreadPoolExecutor(self.threads) as pool:
                parts = list(pool.map(lambda t: t(v), terms))
        else:
            parts = [t(v) for t in terms]
        return np.sum(parts, axis=0)

    def apply(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if self.beta == 0.0:
            if v.shape != (self.s.total_count,):
                raise ValueError(f"expected a vector of length {self.s.total_count}, got {v.shape}")
            return self.alpha * v
        return self.alpha * v + self.beta * self.apply_G(v)

    __call__ = apply
    matvec = apply

    def to_dense(self) -> np.ndarray:
        """Column-by-column dense matrix (small sets only)."""
        n = self.s.total_count
        out = np.empty((n, n))
        e = np.zeros(n)
        for c in range(n):
            e[c] = 1.0
            out[:, c] = self.apply(e)
            e[c] = 0.0
        return out


def crank_nicolson_pair(op: BlockOperator, tau: float, r: float) -> tuple[BlockOperator, BlockOperator]:
    """Left and right operators of one Crank-Nicolson step.

    ``lhs = (1/tau + r/2) I + G/2`` and ``rhs = (1/tau - r/2) I - G/2``, so
    ``lhs(v) + rhs(v) == (2/tau) v``.
    """
    return (
        op.with_coefficients(1.0 / tau + 0.5 * r, 0.5),
        op.with_coefficients(1.0 / tau - 0.5 * r, -0.5),
    )


# ---------------------------------------------------------------------------
# payoff projection and synthesis
# ---------------------------------------------------------------------------
def project_payoff(
    u0: Callable[..., np.ndarray],
    s: SparseIndexSet,
    b: Basis1D,
    extra_levels: int = 2,
    n_nodes: int = 4,
    chunk_points: int = 1 << 22,
) -> np.ndarray:
    """Coefficients ``<u0, psi_lambda>`` for every index of ``s``.

    Composite Gauss quadrature on the uniform grid of level
    ``s.k + 3 + extra_levels`` per axis (the basis is polynomial on level
    ``s.k + 3`` cells).  The tensor grid is contracted one axis at a time,
    keeping only the level combinations present in ``s``.

    If ``u0`` has a ``kink_plane`` attribute ``(normal, offset)``, the first
    axis is integrated with the kink as an extra breakpoint, so that sweep
    is exact up to the smoothness of ``u0`` on either side.
    """
    d = s.d
    grid = np.linspace(0.0, 1.0, 2 ** (s.k + 3 + extra_levels) + 1)
    rule = gauss_legendre(n_nodes)
    x, w = rule.mapped(grid[:-1], grid[1:])
    x, w = x.ravel(), w.ravel()
    n = x.size
    n1 = int(sum(s.widths))
    Vw = b.values(x, count=n1) * w
    off = np.concatenate([[0], np.cumsum(s.widths)])

    # first axis: accumulate over slabs so the full tensor grid is never stored
    rest = n ** (d - 1)
    slab = max(1, chunk_points // max(rest, 1))
    T = np.zeros((n1,) + (n,) * (d - 1))
    mesh = np.meshgrid(*([x] * (d - 1)), indexing="ij", sparse=True) if d > 1 else []
    for a in range(0, n, slab):
        xs = x[a : a + slab].reshape((-1,) + (1,) * (d - 1))
        F = u0(xs, *mesh) * np.ones((1,) + (n,) * (d - 1))
        T += np.tensordot(Vw[:, a : a + slab], F, axes=([1], [0]))

    plane = getattr(u0, "kink_plane", None)
    if plane is not None:
        _kink_correction(T, u0, plane, b, x, grid, rule, n1, chunk_points)

    out: dict[tuple[int, ...], np.ndarray] = {}

    def rec(T, prefix: tuple[int, ...], budget: int):
        depth = len(prefix)
        if depth == d:
            out[prefix] = T
            return
        for level in range(budget + 1):
            part = T[(slice(None),) * depth + (slice(off[level], off[level + 1]),)]
            if depth + 1 < d:
                nxt = _mode_mult(Vw[: off[budget - level + 1]], part, depth + 1)
            else:
                nxt = part
            rec(nxt, prefix + (level,), budget - level)

    rec(T, (), s.k)
    return np.concatenate([out[m].ravel() for m in s.blocks])


def _kink_correction(T, u0, plane, b, x, grid, rule, n1, chunk_points):
    """Replace the Gauss sum on each first-axis cell cut by the kink with a split rule."""
    normal, offset = plane
    d = len(normal)
    if normal[0] == 0.0:
        return
    n = x.size
    q = rule.size
    ncell = grid.size - 1
    flat = T.reshape(n1, -1)
    rest_pts = np.array(np.meshgrid(*([x] * (d - 1)), indexing="ij")).reshape(d - 1, -1) if d > 1 else np.zeros((0, 1))
    chunk = max(1, chunk_points // (4 * q * max(n1, 1)))
    for a in range(0, rest_pts.shape[1], chunk):
        r = rest_pts[:, a : a + chunk]
        z0 = (offset - normal[1:] @ r) / normal[0]
        cell = np.floor(z0 * ncell).astype(np.int64)
        lo = cell / ncell
        inside = (z0 > 0.0) & (z0 < 1.0) & (z0 - lo > 1e-14) & (lo + 1.0 / ncell - z0 > 1e-14)
        if not inside.any():
            continue
        idx = np.flatnonzero(inside)
        z0, cell, lo = z0[idx], cell[idx], lo[idx]
        hi = lo + 1.0 / ncell
        r = r[:, idx]
        left_x, left_w = rule.mapped(lo, z0)
        right_x, right_w = rule.mapped(z0, hi)
        std = cell[:, None] * q + np.arange(q)[None, :]
        nodes = np.concatenate([left_x, right_x, x[std]], axis=1)  # (m, 3q)
        weights = np.concatenate([left_w, right_w, -np.broadcast_to(rule.mapped(lo, hi)[1], std.shape)], axis=1)
        vals = u0(nodes, *[r[i][:, None] for i in range(d - 1)]) * weights
        V = b.values(nodes.ravel(), count=n1).reshape(n1, *nodes.shape)
        flat[:, a + idx] += np.einsum("fmk,mk->fm", V, vals)


def evaluate_expansion(c: np.ndarray, s: SparseIndexSet, b: Basis1D, z) -> np.ndarray:
    """Values of ``sum_lambda c_lambda psi_lambda`` at points ``z`` of shape (npts, d)."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    if z.shape[1] != s.d:
        raise ValueError("points have the wrong dimension")
    if np.any(z <= 0.0) or np.any(z >= 1.0):
        raise ValueError("points must lie strictly inside the unit cube")
    n1 = int(sum(s.widths))
    off = np.concatenate([[0], np.cumsum(s.widths)])
    V = [b.values(z[:, i], count=n1) for i in range(s.d)]  # (n1, npts) per axis
    vals = np.zeros(z.shape[0])
    for idx, m in enumerate(s.blocks):
        C = c[s.block_slice(idx)].reshape(s.block_shape(m))
        for p in range(z.shape[0]):
            t = C
            for i in range(s.d):
                t = np.tensordot(V[i][off[m[i]] : off[m[i] + 1], p], t, axes=([0], [0]))
            vals[p] += t
    return vals
