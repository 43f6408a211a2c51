"""Orthogonal cubic spline wavelets on the unit interval.

The six scaling generators (and the two boundary scaling generators) are read
from a coefficient table.  Wavelet generators on the real line and the
boundary wavelets adapted to homogeneous Dirichlet conditions are rebuilt
from them with null spaces and Gram-Schmidt, and :func:`build_basis` assembles
the indexed interval basis up to a maximal level.

Indexing used throughout the package: level 0 holds the 6 scaling functions
followed by the 6 level-0 wavelets (12 functions), level ``j >= 1`` holds the
``6 * 2**j`` wavelets of that level.  Within a wavelet level the order is
left boundary (2), then per cell ``c``: the two wavelets supported in the cell
followed by the four wavelets centred at its right node (if interior), and
finally the right boundary wavelets (2).
"""
from __future__ import annotations

import csv
import hashlib
import io
import logging
from collections import OrderedDict
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import null_space as _scipy_null_space
from scipy.optimize import least_squares

from .splinekit import (
    PiecewisePoly,
    gauss_legendre,
    hermite_generators,
    inner_product,
    linear_combination,
)

log = logging.getLogger(__name__)

__all__ = [
    "BasisError",
    "BasisFunction",
    "GeneratorSet",
    "Basis1D",
    "BasisReport",
    "load_scaling_generators",
    "construct_wavelet_generators",
    "construct_boundary_functions",
    "default_generators",
    "build_basis",
    "verify_basis",
    "reconstruct_scaling_generators_optional",
    "save_generators",
    "load_generators",
    "null_space",
    "level_sizes",
]

CACHE_VERSION = "orthowave-generators v1"
SCALING = "scaling"
INNER = "inner-wavelet"
LEFT = "left-boundary-wavelet"
RIGHT = "right-boundary-wavelet"


class BasisError(ValueError):
    """Raised when a generator or basis fails a structural check."""


def null_space(a: np.ndarray, rcond: float = 1e-10) -> np.ndarray:
    """Orthonormal null-space basis via SVD, rank cutoff ``rcond * sigma_max``."""
    return _scipy_null_space(np.atleast_2d(a), rcond=rcond)


def _gram_schmidt(funcs: Sequence[PiecewisePoly], against: Sequence[PiecewisePoly] = ()) -> list[PiecewisePoly]:
    """Orthonormalise ``funcs`` (and against ``against``), two passes per vector."""
    out: list[PiecewisePoly] = []
    for f in funcs:
        for _ in range(2):
            for e in (*against, *out):
                f = f - inner_product(f, e) * e
        nrm = f.norm()
        if nrm < 1e-12:
            raise BasisError("Gram-Schmidt breakdown: linearly dependent input")
        out.append(f / nrm)
    return out


def _fix_sign(p: PiecewisePoly) -> PiecewisePoly:
    """Make the first non-negligible coefficient positive."""
    c = p.coefs
    flat = c.ravel()
    big = np.flatnonzero(np.abs(flat) > 1e-9 * np.max(np.abs(flat)))
    return -p if big.size and flat[big[0]] < 0 else p


def _clean(p: PiecewisePoly, lo: float, hi: float) -> PiecewisePoly:
    """Restrict to ``[lo, hi]`` and drop pieces that are numerically zero."""
    p = p.restrict(lo, hi)
    scale = np.max(np.abs(p.coefs))
    return p.trim(1e-13 * scale)


# ---------------------------------------------------------------------------
# generator set
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class GeneratorSet:
    """Scaling, wavelet and boundary generators (all :class:`PiecewisePoly`).

    ``scaling`` holds phi_1..phi_6 (phi_1..phi_4 on [0, 1], phi_5, phi_6 on
    [-1, 1]); ``wavelets`` psi_1..psi_6 (psi_1, psi_2 on [0, 1], the rest on
    [-1, 1]); ``boundary_wavelets`` psi_L1, psi_L2, psi_R1, psi_R2 on [0, 1].
    """

    scaling: tuple[PiecewisePoly, ...]
    phi_L: PiecewisePoly | None = None
    phi_R: PiecewisePoly | None = None
    wavelets: tuple[PiecewisePoly, ...] | None = None
    boundary_wavelets: tuple[PiecewisePoly, ...] | None = None
    tabulated: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def complete(self) -> bool:
        return self.wavelets is not None and self.boundary_wavelets is not None

    def named(self) -> "OrderedDict[str, PiecewisePoly]":
        out: OrderedDict[str, PiecewisePoly] = OrderedDict()
        for i, p in enumerate(self.scaling, 1):
            out[f"phi{i}"] = p
        if self.phi_L is not None:
            out["phiL"] = self.phi_L
            out["phiR"] = self.phi_R
        if self.wavelets is not None:
            for i, p in enumerate(self.wavelets, 1):
                out[f"psi{i}"] = p
        if self.boundary_wavelets is not None:
            for name, p in zip(("psiL1", "psiL2", "psiR1", "psiR2"), self.boundary_wavelets):
                out[name] = p
        return out

    def fingerprint(self) -> str:
        """Hash of every stored coefficient; used as a cache key."""
        h = hashlib.sha256()
        for name, p in self.named().items():
            h.update(name.encode())
            h.update(np.ascontiguousarray(p.breaks).tobytes())
            h.update(np.ascontiguousarray(p.coefs).tobytes())
        return h.hexdigest()


def _parse_table(text: str) -> "OrderedDict[str, PiecewisePoly]":
    rows: "OrderedDict[str, list[list[float]]]" = OrderedDict()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 7:
            raise BasisError(f"line {lineno}: expected 7 fields, got {len(parts)}")
        try:
            rows.setdefault(parts[0], []).append([float(v) for v in parts[1:]])
        except ValueError as exc:
            raise BasisError(f"line {lineno}: {exc}") from None
    out: "OrderedDict[str, PiecewisePoly]" = OrderedDict()
    for name, rs in rows.items():
        arr = np.array(rs)
        a, b = arr[:, 0].copy(), arr[:, 1].copy()
        # a restart of the interval labels means the earlier block lives one unit left
        for i in range(len(arr) - 1, 0, -1):
            if a[i] < b[i - 1]:
                a[:i] -= 1.0
                b[:i] -= 1.0
        if np.any(np.abs(a[1:] - b[:-1]) > 1e-14):
            raise BasisError(f"{name}: intervals are not contiguous")
        out[name] = PiecewisePoly.from_global(np.r_[a, b[-1]], arr[:, 2:])
    return out


def _default_table_text() -> str:
    return resources.files("orthowave.data").joinpath("scaling_generators.txt").read_text()


def load_scaling_generators(table: str | Path | None = None, tol: float = 1e-6) -> GeneratorSet:
    """Read phi_1..phi_6 (and the tabulated phi_L, phi_R) from a coefficient table.

    Checks unit norms and orthogonality of the family under integer
    translates; a residual above ``tol`` raises :class:`BasisError` (this is
    what an incorrectly read interval convention looks like).
    """
    text = _default_table_text() if table is None else Path(table).read_text()
    funcs = _parse_table(text)
    try:
        scaling = tuple(funcs[f"phi{i}"] for i in range(1, 7))
    except KeyError as exc:
        raise BasisError(f"missing scaling generator {exc}") from None
    res = scaling_orthonormality_residual(scaling)
    if res > tol:
        raise BasisError(f"scaling generators are not orthonormal (residual {res:.2e})")
    tab = {k: v for k, v in funcs.items() if k in ("phiL", "phiR")}
    return GeneratorSet(scaling=scaling, tabulated=tab)


def scaling_orthonormality_residual(scaling: Sequence[PiecewisePoly]) -> float:
    """Max |<phi_i(. - s), phi_j> - delta| over s in {-1, 0, 1}."""
    worst = 0.0
    for s in (-1, 0, 1):
        for i, p in enumerate(scaling):
            for j, q in enumerate(scaling):
                target = 1.0 if (s == 0 and i == j) else 0.0
                worst = max(worst, abs(inner_product(p.shift(s), q) - target))
    return worst


def _phi1k(phi: Sequence[PiecewisePoly], k: int) -> PiecewisePoly:
    """Level-one scaling function phi_{1,k} on the real line."""
    kk, l = divmod(k - 1, 6)
    shift = kk if l < 4 else kk + 1
    return phi[l].rescale(1, shift)


def _phi0k(phi: Sequence[PiecewisePoly], k: int) -> PiecewisePoly:
    kk, l = divmod(k - 1, 6)
    return phi[l].shift(kk if l < 4 else kk + 1)


def construct_wavelet_generators(g: GeneratorSet, tol: float = 1e-8) -> GeneratorSet:
    """Build psi_1..psi_6 spanning V_1 (-) V_0 on the real line."""
    phi = g.scaling
    # psi_1, psi_2: level-one functions inside [0, 1] orthogonal to V_0
    p = [phi[k].affine(2.0, 0.0) for k in range(4)] + [phi[k].affine(2.0, 1.0) for k in range(6)]
    q = list(phi) + [phi[4].shift(1.0), phi[5].shift(1.0)]
    S = np.array([[inner_product(pi, qj) for qj in q] for pi in p])
    ns = null_space(S.T)
    if ns.shape[1] != 2:
        raise BasisError(f"null space of S has dimension {ns.shape[1]}, expected 2")
    u = [linear_combination(ns[:, i], p) for i in range(2)]
    psi12 = _gram_schmidt(u)

    # psi_3, psi_4: phi_5(2.), phi_6(2.) minus their projection on phi_5, phi_6
    h = []
    for f in (phi[4].affine(2.0, 0.0), phi[5].affine(2.0, 0.0)):
        h.append(f - inner_product(f, phi[4]) * phi[4] - inner_product(f, phi[5]) * phi[5])
    psi34 = _gram_schmidt(h)

    # psi_5, psi_6: level-one combinations inside [-1, 1]
    level1 = [_phi1k(phi, k) for k in range(-11, 11)]
    constraints = [_phi0k(phi, k) for k in range(-7, 7)]
    constraints += [psi12[0].shift(-1.0), psi12[1].shift(-1.0), *psi12, *psi34]
    T = np.array([[inner_product(c, f) for f in level1] for c in constraints])
    nt = null_space(T)
    if nt.shape[1] != 2:
        raise BasisError(f"null space of T has dimension {nt.shape[1]}, expected 2")
    z = [linear_combination(nt[:, i], level1) for i in range(2)]
    psi56 = _gram_schmidt(z)

    wavelets = tuple(_fix_sign(w.trim(1e-13 * np.max(np.abs(w.coefs)))) for w in (*psi12, *psi34, *psi56))
    res = wavelet_orthogonality_residual(phi, wavelets)
    if res > tol:
        raise BasisError(f"wavelet generators lost orthogonality (residual {res:.2e})")
    return replace(g, wavelets=wavelets)


def wavelet_orthogonality_residual(phi: Sequence[PiecewisePoly], psi: Sequence[PiecewisePoly]) -> float:
    """Max deviation from the real-line orthonormality relations, shifts -1..1."""
    worst = 0.0
    for s in (-1, 0, 1):
        for i, a in enumerate(psi):
            for j, b in enumerate(psi):
                target = 1.0 if (s == 0 and i == j) else 0.0
                worst = max(worst, abs(inner_product(a.shift(s), b) - target))
            for f in phi:
                worst = max(worst, abs(inner_product(a.shift(s), f)))
    return worst


def construct_boundary_functions(g: GeneratorSet, tol: float = 1e-10) -> GeneratorSet:
    """Boundary scaling functions phi_L, phi_R and boundary wavelets on [0, 1]."""
    if g.wavelets is None:
        raise BasisError("wavelet generators must be constructed first")
    phi5, phi6 = g.scaling[4], g.scaling[5]
    a5, a6 = phi5(0.0), phi6(0.0)
    phi_L = (a6 * phi5 - a5 * phi6).restrict(0.0, 1.0)
    phi_R = (a6 * phi5.shift(1.0) - a5 * phi6.shift(1.0)).restrict(0.0, 1.0)
    phi_L = _fix_sign(phi_L / phi_L.norm())
    phi_R = _fix_sign(phi_R / phi_R.norm())

    crossing = g.wavelets[2:]  # psi_3..psi_6, the wavelets not vanishing at 0
    left = [w.restrict(0.0, 1.0) for w in crossing]
    G = np.array([[w(0.0) for w in crossing], [inner_product(phi_L, w) for w in left]])
    nb = null_space(G)
    if nb.shape[1] != 2:
        raise BasisError(f"null space of G has dimension {nb.shape[1]}, expected 2")
    psiL = _gram_schmidt([linear_combination(nb[:, i], left) for i in range(2)])

    right = [w.shift(1.0).restrict(0.0, 1.0) for w in crossing]
    H = np.array([[w(1.0) for w in right], [inner_product(phi_R, w) for w in right]])
    nh = null_space(H)
    if nh.shape[1] != 2:
        raise BasisError(f"null space of H has dimension {nh.shape[1]}, expected 2")
    psiR = _gram_schmidt([linear_combination(nh[:, i], right) for i in range(2)])

    bw = tuple(_fix_sign(_clean(f, 0.0, 1.0)) for f in (*psiL, *psiR))
    for name, f in zip(("psiL1", "psiL2", "psiR1", "psiR2"), bw):
        edge = max(abs(f(0.0)), abs(f(1.0)))
        if edge > tol:
            raise BasisError(f"{name} does not vanish at the boundary ({edge:.2e})")
    for f in bw[:2]:
        if abs(inner_product(f, phi_L)) > 1e-8:
            raise BasisError("left boundary wavelet not orthogonal to phi_L")
    for f in bw[2:]:
        if abs(inner_product(f, phi_R)) > 1e-8:
            raise BasisError("right boundary wavelet not orthogonal to phi_R")
    return replace(g, phi_L=phi_L, phi_R=phi_R, boundary_wavelets=bw)


def tabulated_agreement(g: GeneratorSet) -> dict[str, float]:
    """Max coefficient mismatch (up to sign) between built and tabulated phi_L, phi_R."""
    out = {}
    for name, built in (("phiL", g.phi_L), ("phiR", g.phi_R)):
        tab = g.tabulated.get(name)
        if tab is None or built is None:
            continue
        grid = np.union1d(tab.breaks, built.breaks)
        x = np.linspace(0.0, 1.0, 401)
        a, b = built(x), tab(x)
        s = np.sign(np.dot(a, b)) or 1.0
        ca = built.refine(grid).global_coefficients()
        cb = tab.refine(grid).global_coefficients()
        out[name] = float(np.max(np.abs(s * ca - cb)) / np.max(np.abs(cb)))
    return out


_DEFAULT: GeneratorSet | None = None


def default_generators() -> GeneratorSet:
    """The complete generator set built from the packaged table (memoised)."""
    global _DEFAULT
    if _DEFAULT is None:
        g = load_scaling_generators()
        g = construct_wavelet_generators(g)
        _DEFAULT = construct_boundary_functions(g)
    return _DEFAULT


# ---------------------------------------------------------------------------
# interval basis
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class BasisFunction:
    level: int
    translation: int
    kind: str
    shape: PiecewisePoly

    @property
    def support(self) -> tuple[float, float]:
        return self.shape.support


def level_sizes(k: int) -> list[int]:
    """Number of 1D functions in each sparse level 0..k (12, 12, 24, ...)."""
    return [12] + [6 * 2**j for j in range(1, k + 1)]


def _wavelet_level(g: GeneratorSet, j: int) -> list[BasisFunction]:
    n = 2**j
    scale = 2.0 ** (0.5 * j)
    psi = g.wavelets
    L1, L2, R1, R2 = g.boundary_wavelets
    shapes: list[tuple[str, PiecewisePoly]] = [
        (LEFT, L1.affine(n, 0.0) * scale),
        (LEFT, L2.affine(n, 0.0) * scale),
    ]
    for c in range(n):
        shapes += [(INNER, psi[0].rescale(j, c)), (INNER, psi[1].rescale(j, c))]
        if c + 1 < n:
            shapes += [(INNER, psi[l].rescale(j, c + 1)) for l in range(2, 6)]
    shapes += [
        (RIGHT, R1.affine(n, n - 1.0) * scale),
        (RIGHT, R2.affine(n, n - 1.0) * scale),
    ]
    return [BasisFunction(j, t, kind, f) for t, (kind, f) in enumerate(shapes, 1)]


@dataclass(frozen=True)
class Basis1D:
    """Interval basis: 6 scaling functions plus wavelets on levels 0..max_level."""

    max_level: int
    functions: tuple[BasisFunction, ...]
    generators: GeneratorSet = field(repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.functions)

    def __iter__(self):
        return iter(self.functions)

    def __getitem__(self, i):
        return self.functions[i]

    @property
    def sizes(self) -> list[int]:
        return level_sizes(self.max_level)

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.sizes)])

    def count_up_to(self, level: int) -> int:
        return 12 * 2**level

    def finest_grid(self) -> np.ndarray:
        """Dyadic grid containing every breakpoint of every function."""
        return np.linspace(0.0, 1.0, 2 ** (self.max_level + 3) + 1)

    def values(self, x, deriv: int = 0, count: int | None = None) -> np.ndarray:
        """Matrix of ``f^(deriv)(x)`` for the first ``count`` functions."""
        x = np.asarray(x, dtype=float)
        order = np.argsort(x, kind="stable")
        xs = x[order]
        funcs = self.functions[: count if count is not None else len(self)]
        out = np.zeros((len(funcs), len(x)))
        for i, bf in enumerate(funcs):
            f = bf.shape if deriv == 0 else _derivative_cached(bf.shape, deriv)
            lo, hi = f.support
            a = np.searchsorted(xs, lo, side="left")
            b = np.searchsorted(xs, hi, side="right")
            if b > a:
                out[i, order[a:b]] = f(xs[a:b])
        return out

    def quadrature(self, n_nodes: int = 4, extra_levels: int = 0):
        """Composite Gauss nodes/weights on the finest breakpoint grid."""
        grid = np.linspace(0.0, 1.0, 2 ** (self.max_level + 3 + extra_levels) + 1)
        x, w = gauss_legendre(n_nodes).mapped(grid[:-1], grid[1:])
        return x.ravel(), w.ravel()

    def matrices(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Exact mass, stiffness and advection matrices (I, M, B) of the basis.

        ``I_ij = <f_i, f_j>``, ``M_ij = <f_i', f_j'>``, ``B_ij = <f_i', f_j>``.
        """
        x, w = self.quadrature()
        V = self.values(x)
        D = self.values(x, deriv=1)
        Vw, Dw = V * w, D * w
        return Vw @ V.T, Dw @ D.T, Dw @ V.T

    def scaling_only(self) -> "Basis1D":
        """The 6 level-0 scaling functions alone (coarsest table row)."""
        return Basis1D(0, self.functions[:6], self.generators)


_DERIV_CACHE: dict[int, PiecewisePoly] = {}


def _derivative_cached(p: PiecewisePoly, order: int) -> PiecewisePoly:
    key = (id(p), order)
    hit = _DERIV_CACHE.get(key)
    if hit is None or hit[0] is not p:
        d = p
        for _ in range(order):
            d = d.derivative()
        hit = (p, d)
        _DERIV_CACHE[key] = hit
    return hit[1]


def build_basis(g: GeneratorSet | None, k: int) -> Basis1D:
    """Interval basis Psi^k: scaling functions plus wavelet levels 0..k."""
    if k < 0:
        raise ValueError("k must be non-negative")
    g = default_generators() if g is None else g
    if not g.complete:
        raise BasisError("generator set incomplete: construct wavelets and boundary functions first")
    phi = g.scaling
    funcs = [BasisFunction(0, t, SCALING, f) for t, f in enumerate((g.phi_L, *phi[:4], g.phi_R), -5)]
    for j in range(k + 1):
        funcs += _wavelet_level(g, j)
    return Basis1D(k, tuple(funcs), g)


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------
@dataclass
class BasisReport:
    max_level: int
    orthonormality: float
    vanishing_moments: float
    boundary_values: float
    support_ratio: float
    h1_condition: float
    tolerances: dict = field(
        default_factory=lambda: {
            "orthonormality": 1e-8,
            "vanishing_moments": 1e-10,
            "boundary_values": 1e-10,
            "support_ratio": 1.0,
        }
    )

    def checks(self) -> list[tuple[str, float, float, bool]]:
        rows = []
        for name in ("orthonormality", "vanishing_moments", "boundary_values", "support_ratio"):
            val = getattr(self, name)
            tol = self.tolerances[name]
            rows.append((name, val, tol, bool(val <= tol)))
        rows.append(("h1_condition", self.h1_condition, float("inf"), bool(np.isfinite(self.h1_condition))))
        return rows

    @property
    def passed(self) -> bool:
        return all(ok for *_, ok in self.checks())

    def first_failure(self) -> str | None:
        for name, val, tol, ok in self.checks():
            if not ok:
                return f"{name}: {val:.3e} > {tol:.1e}"
        return None

    def to_text(self) -> str:
        lines = [f"basis verification, max level {self.max_level}"]
        for name, val, tol, ok in self.checks():
            lines.append(f"  {name:<18} {val:.3e}  (tol {tol:.1e})  {'PASS' if ok else 'FAIL'}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["check", "residual", "tolerance", "status"])
        for name, val, tol, ok in self.checks():
            w.writerow([name, f"{val:.6e}", f"{tol:.1e}", "pass" if ok else "fail"])
        return buf.getvalue()


def h1_seminorm_condition(b: Basis1D) -> float:
    """Condition number of the H1-seminorm-normalised basis (sqrt of stiffness cond)."""
    _, M, _ = b.matrices()
    d = 1.0 / np.sqrt(np.diag(M))
    ev = np.linalg.eigvalsh(M * d[:, None] * d[None, :])
    return float(np.sqrt(ev[-1] / ev[0]))


def verify_basis(b: Basis1D) -> BasisReport:
    x, w = b.quadrature()
    V = b.values(x)
    gram = (V * w) @ V.T
    ortho = float(np.max(np.abs(gram - np.eye(len(b)))))
    inner = np.array([bf.kind == INNER for bf in b])
    mom = 0.0
    if inner.any():
        powers = np.vstack([x**m for m in range(4)])
        mom = float(np.max(np.abs((V[inner] * w) @ powers.T)))
    ends = b.values(np.array([0.0, 1.0]))
    bnd = float(np.max(np.abs(ends)))
    ratio = max((bf.support[1] - bf.support[0]) / 2.0 ** (1 - bf.level) for bf in b if bf.kind != SCALING)
    return BasisReport(b.max_level, ortho, mom, bnd, float(ratio), h1_seminorm_condition(b))


def hermite_space_residual(f: PiecewisePoly, level: int) -> float:
    """Relative L2 distance of ``f`` from the C1 Hermite cubics on the grid ``2**-level``.

    The Hermite frame is restricted to the support of ``f``; the support end
    points must lie on the grid.
    """
    xi1, xi2 = hermite_generators()
    n = 2**level
    lo, hi = f.support
    first, last = int(round(lo * n)), int(round(hi * n))
    frame = []
    for node in range(first, last + 1):
        for gen in (xi1, xi2):
            frame.append(gen.affine(float(n), float(node)).restrict(lo, hi))
    G = np.array([[inner_product(a, c) for c in frame] for a in frame])
    rhs = np.array([inner_product(a, f) for a in frame])
    coef = np.linalg.lstsq(G, rhs, rcond=None)[0]
    proj = linear_combination(coef, frame)
    return (f - proj).norm() / f.norm()


# ---------------------------------------------------------------------------
# cache files
# ---------------------------------------------------------------------------
def _cache_body(g: GeneratorSet) -> str:
    lines = []
    for name, p in g.named().items():
        for i in range(p.n_pieces):
            c = p.coefs[i]
            lines.append(
                f"{name} {float(p.breaks[i]):.17g} {float(p.breaks[i + 1]):.17g} "
                + " ".join(f"{v:.17g}" for v in c)
            )
    return "\n".join(lines) + "\n"


def save_generators(g: GeneratorSet, path: str | Path) -> str:
    """Write the generator cache atomically; returns the content hash."""
    body = _cache_body(g)
    digest = hashlib.sha256(body.encode()).hexdigest()
    text = f"# {CACHE_VERSION}\n# local-coefficients name a b c3 c2 c1 c0\n# sha256 {digest}\n" + body
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)
    return digest


def load_generators(path: str | Path) -> GeneratorSet:
    """Read a generator cache written by :func:`save_generators`.

    Raises :class:`BasisError` on a version mismatch or a hash mismatch.
    """
    text = Path(path).read_text()
    head, body = [], []
    for line in text.splitlines(keepends=True):
        (head if line.startswith("#") else body).append(line)
    if not head or head[0].strip() != f"# {CACHE_VERSION}":
        raise BasisError("unknown cache version")
    digest = next((h.split()[-1] for h in head if h.startswith("# sha256")), None)
    body_text = "".join(body)
    if digest != hashlib.sha256(body_text.encode()).hexdigest():
        raise BasisError("cache hash mismatch")
    rows: "OrderedDict[str, list]" = OrderedDict()
    for line in body:
        name, *vals = line.split()
        rows.setdefault(name, []).append([float(v) for v in vals])
    funcs = {}
    for name, rs in rows.items():
        arr = np.array(rs)
        funcs[name] = PiecewisePoly(np.r_[arr[:, 0], arr[-1, 1]], arr[:, 2:])
    return GeneratorSet(
        scaling=tuple(funcs[f"phi{i}"] for i in range(1, 7)),
        phi_L=funcs["phiL"],
        phi_R=funcs["phiR"],
        wavelets=tuple(funcs[f"psi{i}"] for i in range(1, 7)),
        boundary_wavelets=tuple(funcs[n] for n in ("psiL1", "psiL2", "psiR1", "psiR2")),
    )


# ---------------------------------------------------------------------------
# optional: rebuild the scaling generators from the Hermite splines
# ---------------------------------------------------------------------------
def _xi(j: int, k: int) -> PiecewisePoly:
    """Hermite function xi_{j,k} = 2^{j/2} xi_l(2^j x - m), k = 2m + l - 1."""
    xi = hermite_generators()
    m, l = divmod(k, 2)
    return xi[l].rescale(j, m)


@dataclass
class Reconstruction:
    generators: GeneratorSet
    lm_residual: float
    null_dim: int
    attempts: int


def reconstruct_scaling_generators_optional(seed: int = 0, max_attempts: int = 20, tol: float = 1e-10) -> Reconstruction:
    """Rebuild an orthonormal set phi_1..phi_6 in double precision.

    Orthonormalises the two level-one Hermite functions inside [0, 1], finds
    the complement A_1 (-) A_0 from the null space of the cross Gram matrix,
    solves the seven quadratic conditions for phi_3, phi_4 by
    Levenberg-Marquardt, and closes with phi_5, phi_6 by projection.  The
    result is one of infinitely many admissible generator sets; compare by
    orthonormality, not by coefficients.
    """
    phi1 = _xi(1, 2) / _xi(1, 2).norm()
    phi2 = _xi(1, 3) / _xi(1, 3).norm()
    a0 = [_xi(1, 2), _xi(1, 3)]
    a1 = [_xi(2, j) for j in range(2, 8)]
    C = np.array([[inner_product(a, b) for b in a1] for a in a0])
    nc = null_space(C)
    w = [linear_combination(nc[:, i], a1) for i in range(nc.shape[1])]
    v = _gram_schmidt(w)

    def c_func(xi):
        r = xi.restrict(0.0, 1.0)
        return r - inner_product(xi, phi1) * phi1 - inner_product(xi, phi2) * phi2

    cs = [c_func(_xi(1, 0)), c_func(_xi(1, 1)), c_func(_xi(1, 4)), c_func(_xi(1, 5))]
    cc = np.array([[inner_product(a, b) for b in cs] for a in cs])
    cv = np.array([[inner_product(a, b) for b in v] for a in cs])

    def residual(s):
        s = s.reshape(2, 4)
        proj = cv @ s.T  # <c_i, phi_{m+2}>
        eq = [cc[i, k] - proj[i] @ proj[k] for i in (0, 1) for k in (2, 3)]
        eq += [s[0] @ s[0] - 1.0, s[1] @ s[1] - 1.0, s[0] @ s[1], 0.0]
        return np.array(eq)

    rng = np.random.default_rng(seed)
    best = None
    for attempt in range(1, max_attempts + 1):
        sol = least_squares(residual, rng.standard_normal(8), method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
        r = float(np.linalg.norm(sol.fun))
        if best is None or r < best[1]:
            best = (sol.x, r)
        if r <= tol:
            break
    s, r = best
    if r > tol:
        raise BasisError(f"Levenberg-Marquardt did not converge (residual {r:.2e})")
    s = s.reshape(2, 4)
    phi3 = linear_combination(s[0], v)
    phi4 = linear_combination(s[1], v)
    base = [phi1, phi2, phi3, phi4]
    shifted = [f.shift(-1.0) for f in base]

    xi10 = _xi(1, 0)
    g5 = xi10 - linear_combination(
        [inner_product(xi10, f) for f in base + shifted], base + shifted
    )
    phi5 = g5 / g5.norm()
    base5 = base + [phi5]
    shifted5 = shifted + [phi5.shift(-1.0), phi5.shift(1.0)]
    xi11 = _xi(1, 1)
    g6 = xi11 - linear_combination(
        [inner_product(xi11, f) for f in base5 + shifted5], base5 + shifted5
    )
    phi6 = g6 / g6.norm()
    phi6 = phi6.trim(1e-13 * np.max(np.abs(phi6.coefs)))
    gens = GeneratorSet(scaling=tuple(_fix_sign(f) for f in (*base, phi5, phi6)))
    return Reconstruction(gens, r, nc.shape[1], attempt)
