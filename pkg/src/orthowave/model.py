"""Black-Scholes model for geometric-average basket options.

Coordinate chain used by the solver::

    S  --ln-->  y  --(y - b t)-->  x  --(x - x_min) / d-->  z in (0, 1)^d

with ``b_i = sigma_i**2 / 2 - r``.  In ``x`` the pricing equation has no
first-order terms; on the unit cube its diffusion matrix is
``P_ij = rho_ij sigma_i sigma_j / (2 d_i d_j)``.
"""
from __future__ import annotations

import json
import math
from importlib import resources
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.special import ndtr

__all__ = [
    "OptionKind",
    "MarketParams",
    "DomainSpec",
    "PricingProblem",
    "normal_cdf",
    "effective_vol_and_div",
    "analytic_price",
    "black_scholes_put",
    "CubePayoff",
    "payoff_on_cube",
    "prices_to_cube",
    "cube_to_prices",
    "load_problem",
    "benchmark_file",
    "table_problem",
]


class OptionKind(str, Enum):
    PUT = "put"
    CALL = "call"


@dataclass(frozen=True)
class MarketParams:
    """Market data for ``d`` correlated assets.

    The covariance only has to be positive semidefinite here (the closed-form
    prices stay valid for perfectly correlated assets);
    :class:`PricingProblem` demands positive definiteness.

    ``mu`` (the real-world drift) is kept for completeness; risk-neutral
    pricing never uses it.
    """

    r: float
    sigma: np.ndarray
    rho: np.ndarray
    K: float
    T: float
    mu: np.ndarray | None = None

    def __post_init__(self):
        sigma = np.atleast_1d(np.asarray(self.sigma, dtype=float))
        rho = np.atleast_2d(np.asarray(self.rho, dtype=float))
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "rho", rho)
        d = sigma.size
        if rho.shape != (d, d):
            raise ValueError(f"rho must be {d}x{d}")
        if not np.allclose(rho, rho.T, atol=1e-14) or not np.allclose(np.diag(rho), 1.0):
            raise ValueError("rho must be symmetric with unit diagonal")
        if np.any(sigma <= 0) or self.K <= 0 or self.T <= 0:
            raise ValueError("sigma, K and T must be positive")
        if np.linalg.eigvalsh(self.covariance)[0] < -1e-12 * np.max(sigma) ** 2:
            raise ValueError("covariance matrix is not positive semidefinite")

    @property
    def d(self) -> int:
        return self.sigma.size

    @property
    def covariance(self) -> np.ndarray:
        return self.rho * np.outer(self.sigma, self.sigma)

    @classmethod
    def uniform(cls, d: int, r: float, sigma: float, rho: float, K: float, T: float) -> "MarketParams":
        """Equal volatilities and a constant off-diagonal correlation."""
        corr = np.full((d, d), rho)
        np.fill_diagonal(corr, 1.0)
        return cls(r, np.full(d, sigma), corr, K, T)


@dataclass(frozen=True)
class DomainSpec:
    """Truncated price box ``[S_min, S_max]^d`` and the derived log quantities."""

    S_min: np.ndarray
    S_max: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.S_min, dtype=float))
        hi = np.atleast_1d(np.asarray(self.S_max, dtype=float))
        if np.any(lo <= 0) or np.any(hi <= lo):
            raise ValueError("need 0 < S_min < S_max")
        object.__setattr__(self, "S_min", lo)
        object.__setattr__(self, "S_max", hi)

    @classmethod
    def uniform(cls, d: int, S_min: float, S_max: float) -> "DomainSpec":
        return cls(np.full(d, S_min), np.full(d, S_max))

    @property
    def x_min(self) -> np.ndarray:
        return np.log(self.S_min)

    @property
    def x_max(self) -> np.ndarray:
        return np.log(self.S_max)

    @property
    def widths(self) -> np.ndarray:
        return self.x_max - self.x_min


@dataclass(frozen=True)
class PricingProblem:
    params: MarketParams
    domain: DomainSpec
    kind: OptionKind

    def __post_init__(self):
        if self.domain.S_min.size != self.params.d:
            raise ValueError("domain and market dimension differ")
        if np.linalg.eigvalsh(self.params.covariance)[0] <= 0:
            raise ValueError("covariance matrix must be positive definite for the pricing equation")
        object.__setattr__(self, "kind", OptionKind(self.kind))

    @property
    def d(self) -> int:
        return self.params.d

    def drift(self) -> np.ndarray:
        """``b_i = sigma_i**2 / 2 - r``."""
        return 0.5 * self.params.sigma**2 - self.params.r

    def diffusion(self) -> np.ndarray:
        """Matrix ``P_ij = rho_ij sigma_i sigma_j / (2 d_i d_j)`` on the unit cube."""
        w = self.domain.widths
        return self.params.covariance / (2.0 * np.outer(w, w))


def normal_cdf(x):
    """Standard normal distribution function."""
    return ndtr(x)


def effective_vol_and_div(params: MarketParams) -> tuple[float, float]:
    """Volatility and dividend yield of the geometric average."""
    d = params.d
    var = params.covariance.sum() / d**2
    delta = 0.5 * np.sum(params.sigma**2) / d - 0.5 * var
    return float(np.sqrt(var)), float(delta)


def black_scholes_put(S, K, r, q, sigma, t):
    """Put on one asset with continuous yield ``q``."""
    S = np.asarray(S, dtype=float)
    if t <= 0:
        return np.maximum(K - S, 0.0)
    sq = sigma * math.sqrt(t)
    d1 = (np.log(S / K) + (r - q + 0.5 * sigma**2) * t) / sq
    d2 = d1 - sq
    return K * math.exp(-r * t) * normal_cdf(-d2) - S * np.exp(-q * t) * normal_cdf(-d1)


def analytic_price(kind, params: MarketParams, S, t: float):
    """Closed-form price of a put or call on the geometric average.

    ``S`` has the asset index last; leading axes broadcast.
    """
    S = np.asarray(S, dtype=float)
    if np.any(S <= 0):
        raise ValueError("prices must be positive")
    G = np.exp(np.mean(np.log(S), axis=-1))
    sigma, delta = effective_vol_and_div(params)
    put = black_scholes_put(G, params.K, params.r, delta, sigma, t)
    if OptionKind(kind) is OptionKind.PUT:
        return put
    return put + G * np.exp(-delta * t) - params.K * np.exp(-params.r * t)


def prices_to_cube(problem: PricingProblem, S, t: float) -> np.ndarray:
    """Map prices at time-to-maturity ``t`` to unit-cube coordinates."""
    S = np.asarray(S, dtype=float)
    x = np.log(S) - problem.drift() * t
    return (x - problem.domain.x_min) / problem.domain.widths


def cube_to_prices(problem: PricingProblem, z, t: float) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    x = problem.domain.x_min + problem.domain.widths * z
    return np.exp(x + problem.drift() * t)


class CubePayoff:
    """Payoff of the geometric average as a function of cube coordinates.

    Call with one array per axis (broadcastable).  ``kink_plane`` gives
    ``(normal, offset)`` with the payoff kink on ``normal @ z == offset``.
    """

    def __init__(self, problem: PricingProblem):
        self.xmin = problem.domain.x_min
        self.w = problem.domain.widths
        self.K = problem.params.K
        self.d = problem.d
        self.put = problem.kind is OptionKind.PUT

    def __call__(self, *z):
        if len(z) != self.d:
            raise ValueError(f"expected {self.d} coordinate arrays")
        logsum = sum(self.xmin[i] + self.w[i] * np.asarray(z[i], dtype=float) for i in range(self.d))
        G = np.exp(logsum / self.d)
        return np.maximum(self.K - G, 0.0) if self.put else np.maximum(G - self.K, 0.0)

    @property
    def kink_plane(self) -> tuple[np.ndarray, float]:
        return self.w.copy(), float(self.d * np.log(self.K) - self.xmin.sum())


def payoff_on_cube(problem: PricingProblem) -> CubePayoff:
    """Transformed payoff ``u0(z) = V0(S(z))`` on the unit cube."""
    return CubePayoff(problem)


_FIELDS = ("d", "r", "sigma", "rho", "K", "T", "S_min", "S_max", "option")


def _per_asset(value, d: int, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        arr = np.full(d, arr[0])
    if arr.size != d:
        raise ValueError(f"{name} needs {d} entries")
    return arr


def load_problem(path: str | Path, d: int | None = None, option=None) -> PricingProblem:
    """Read a JSON parameter file.

    Every field in ``d, r, sigma, rho, K, T, S_min, S_max, option`` is
    required.  Scalars for ``sigma``, ``S_min``, ``S_max`` are broadcast; a
    scalar ``rho`` is the constant off-diagonal correlation.  ``d`` and
    ``option`` override the file values when given.
    """
    data = json.loads(Path(path).read_text())
    missing = [f for f in _FIELDS if f not in data]
    if missing:
        raise ValueError(f"missing fields: {', '.join(missing)}")
    if d is not None:
        data["d"] = d
    if option is not None:
        data["option"] = option
    d = int(data["d"])
    rho = np.asarray(data["rho"], dtype=float)
    if rho.ndim == 0:
        rho = np.full((d, d), float(rho))
        np.fill_diagonal(rho, 1.0)
    params = MarketParams(
        float(data["r"]), _per_asset(data["sigma"], d, "sigma"), rho, float(data["K"]), float(data["T"])
    )
    domain = DomainSpec(_per_asset(data["S_min"], d, "S_min"), _per_asset(data["S_max"], d, "S_max"))
    return PricingProblem(params, domain, OptionKind(data["option"]))


def benchmark_file() -> Path:
    """Packaged parameter file of the benchmark experiment."""
    return Path(str(resources.files("orthowave.data").joinpath("benchmark.json")))


def table_problem(d: int, kind="put") -> PricingProblem:
    """The benchmark setting: K=10, T=1, r=0.06, sigma=0.2, rho=0.25, S in [0.1, 50]."""
    return load_problem(benchmark_file(), d=d, option=kind)
