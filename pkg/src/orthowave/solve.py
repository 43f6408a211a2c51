"""Conjugate gradients, Lanczos condition estimates and the time marcher."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .operator import crank_nicolson_pair

log = logging.getLogger(__name__)

__all__ = [
    "CgReport",
    "CgFailure",
    "cg_solve",
    "estimate_condition",
    "MarchConfig",
    "StepLog",
    "march",
]

Apply = Callable[[np.ndarray], np.ndarray]


class CgFailure(RuntimeError):
    """CG hit non-finite values, or a march step failed to converge."""

    def __init__(self, msg: str, step: int | None = None, report: "CgReport | None" = None):
        super().__init__(msg if step is None else f"step {step}: {msg}")
        self.step = step
        self.report = report


@dataclass
class CgReport:
    iterations: int
    residual: float
    converged: bool
    ritz: tuple[float, float] = (float("nan"), float("nan"))

    @property
    def condition(self) -> float:
        lo, hi = self.ritz
        return hi / lo if lo > 0 else float("inf")


def _ritz_extremes(alphas: list[float], betas: list[float]) -> tuple[float, float]:
    """Extreme eigenvalues of the Lanczos tridiagonal implied by CG coefficients."""
    if not alphas:
        return float("nan"), float("nan")
    a = np.asarray(alphas)
    b = np.asarray(betas[: len(alphas) - 1])
    diag = 1.0 / a
    diag[1:] += b / a[:-1]
    off = np.sqrt(b) / a[:-1]
    ev = eigh_tridiagonal(diag, off, eigvals_only=True) if diag.size > 1 else diag
    return float(ev[0]), float(ev[-1])


def cg_solve(
    A: Apply,
    rhs: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 1000,
    x0: np.ndarray | None = None,
) -> tuple[np.ndarray, CgReport]:
    """Unpreconditioned conjugate gradients.

    Stops when ``||rhs - A x|| <= tol * ||rhs||``.  If ``max_iter`` is reached
    the current iterate is returned with ``converged=False``.

    Returns
    -------
    x : ndarray
    report : CgReport
        Iteration count, final relative residual and the extreme Ritz values
        of the CG tridiagonal.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    rhs = np.asarray(rhs, dtype=float)
    nb = np.linalg.norm(rhs)
    if nb == 0.0:
        return np.zeros_like(rhs), CgReport(0, 0.0, True)
    x = np.zeros_like(rhs) if x0 is None else np.array(x0, dtype=float)
    r = rhs - A(x) if x0 is not None else rhs.copy()
    p = r.copy()
    rr = r @ r
    alphas: list[float] = []
    betas: list[float] = []
    rel = np.sqrt(rr) / nb
    it = 0
    while rel > tol and it < max_iter:
        Ap = A(p)
        pAp = p @ Ap
        if not np.isfinite(pAp) or pAp <= 0:
            raise CgFailure(f"non-positive curvature or non-finite value at iteration {it}")
        alpha = rr / pAp
        x += alpha * p
        r -= alpha * Ap
        rr_new = r @ r
        beta = rr_new / rr
        alphas.append(alpha)
        betas.append(beta)
        p = r + beta * p
        rr = rr_new
        it += 1
        rel = np.sqrt(rr) / nb
        if not np.isfinite(rel):
            raise CgFailure(f"non-finite residual at iteration {it}")
    rep = CgReport(it, float(rel), bool(rel <= tol), _ritz_extremes(alphas, betas))
    return x, rep


def estimate_condition(A: Apply, n: int, steps: int = 60, seed: int = 0, return_extremes: bool = False):
    """Spectral condition number by Lanczos with full re-orthogonalisation.

    Runs ``min(steps, n)`` steps from a random start; a breakdown (invariant
    subspace) simply ends the recurrence early.
    """
    rng = np.random.default_rng(seed)
    m = min(steps, n)
    Q = np.zeros((m + 1, n))
    q = rng.standard_normal(n)
    Q[0] = q / np.linalg.norm(q)
    alpha = np.zeros(m)
    beta = np.zeros(m)
    size = m
    for j in range(m):
        w = A(Q[j])
        alpha[j] = Q[j] @ w
        w -= alpha[j] * Q[j] + (beta[j - 1] * Q[j - 1] if j else 0.0)
        for _ in range(2):
            w -= Q[: j + 1].T @ (Q[: j + 1] @ w)
        beta[j] = np.linalg.norm(w)
        if beta[j] < 1e-12 * max(1.0, abs(alpha[j])):
            size = j + 1
            break
        Q[j + 1] = w / beta[j]
    if size > 1:
        ev = eigh_tridiagonal(alpha[:size], beta[: size - 1], eigvals_only=True)
    else:
        ev = alpha[:1]
    lo, hi = float(ev[0]), float(ev[-1])
    if lo <= 0:
        raise ValueError("operator is not positive definite")
    cond = hi / lo
    return (cond, lo, hi) if return_extremes else cond


@dataclass(frozen=True)
class MarchConfig:
    """Time grid for :func:`march`.

    ``M`` steps of size ``tau = T / M``; the first two are replaced by four
    implicit Euler steps of size ``tau / 2``.  With ``M == 1`` only two half
    steps fit, unless ``literal_startup`` is set, in which case four half
    steps are always taken (the march then ends at ``max(T, 2 tau)``).
    """

    T: float
    M: int
    tol: float = 1e-10
    max_iter: int = 500
    warm_start: bool = False
    literal_startup: bool = False

    def __post_init__(self):
        if self.M < 1 or self.T <= 0:
            raise ValueError("need M >= 1 and T > 0")

    @property
    def tau(self) -> float:
        return self.T / self.M

    @property
    def euler_steps(self) -> int:
        return 4 if (self.M >= 2 or self.literal_startup) else 2

    @property
    def cn_steps(self) -> int:
        return max(self.M - 2, 0) if self.M >= 2 else 0

    @property
    def end_time(self) -> float:
        return self.tau * (0.5 * self.euler_steps + self.cn_steps)


@dataclass
class StepLog:
    rows: list[tuple[int, str, int, float]] = field(default_factory=list)

    def add(self, step: int, scheme: str, rep: CgReport) -> None:
        self.rows.append((step, scheme, rep.iterations, rep.residual))

    @property
    def iterations(self) -> list[int]:
        return [r[2] for r in self.rows]

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "scheme", "iterations", "residual"])
            for step, scheme, it, res in self.rows:
                w.writerow([step, scheme, it, f"{res:.6e}"])


def march(op, c0: np.ndarray, cfg: MarchConfig, r: float, log_: StepLog | None = None) -> np.ndarray:
    """Time-march the Galerkin coefficients from the payoff to maturity.

    ``op`` is a :class:`~orthowave.operator.BlockOperator`; its scalars are
    replaced for each scheme.  Implicit Euler half steps solve
    ``((2/tau + r) I + G) c_new = (2/tau) c``; Crank-Nicolson steps solve
    ``((1/tau + r/2) I + G/2) c_new = ((1/tau - r/2) I - G/2) c``.
    """
    tau = cfg.tau
    log_ = StepLog() if log_ is None else log_
    c = np.array(c0, dtype=float)
    euler = op.with_coefficients(2.0 / tau + r, 1.0)
    step = 0
    for _ in range(cfg.euler_steps):
        step += 1
        guess = c if cfg.warm_start else None
        c, rep = cg_solve(euler.apply, (2.0 / tau) * c, cfg.tol, cfg.max_iter, guess)
        if not rep.converged:
            raise CgFailure("CG did not converge", step, rep)
        log_.add(step, "euler", rep)
    lhs, rhs_op = crank_nicolson_pair(op, tau, r)
    for _ in range(cfg.cn_steps):
        step += 1
        guess = c if cfg.warm_start else None
        c, rep = cg_solve(lhs.apply, rhs_op.apply(c), cfg.tol, cfg.max_iter, guess)
        if not rep.converged:
            raise CgFailure("CG did not converge", step, rep)
        log_.add(step, "crank-nicolson", rep)
    return c
