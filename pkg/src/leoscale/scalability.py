"""Closed-form capacity-scalability bounds and the optimal constellation size.

``n`` is treated as a positive real throughout.  The capacity term is
``16 sqrt(n)``, the contention term ``sigma n^1.5`` and the consensus term
``4 n Hk``, where ``Hk`` is the per-slot consensus lower bound of one ISL.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .link_dynamics import (
    LinkDynamics,
    Region,
    RegionError,
    binary_entropy,
    conditional_entropy,
)

LINK_RATE_GBPS = 1.0


class NoOptimumError(ValueError):
    """Both overheads are zero, so scalability grows without bound."""


@dataclass(frozen=True)
class OverheadModel:
    sigma: float
    link_rate: float = LINK_RATE_GBPS

    def __post_init__(self):
        if not (self.sigma >= 0.0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be finite and >= 0, got {self.sigma!r}")


@dataclass(frozen=True)
class ScalabilityPoint:
    n: float
    tau: float
    capacity: float
    contention: float
    consensus: float


def _check_nonneg(**kw):
    for name, v in kw.items():
        if not (v >= 0.0) or math.isnan(v):
            raise ValueError(f"{name} must be non-negative, got {v!r}")


def scalability_point(n: float, sigma: float, hk: float) -> ScalabilityPoint:
    _check_nonneg(sigma=sigma, hk=hk)
    if not n >= 1:
        raise ValueError(f"n must be >= 1, got {n!r}")
    contention = sigma * n ** 1.5
    consensus = 4.0 * n * hk
    return ScalabilityPoint(
        n=n,
        tau=16.0 * math.sqrt(n) / (1.0 + contention + consensus),
        capacity=8.0 * math.sqrt(n),
        contention=contention,
        consensus=consensus,
    )


def tau_upper(n: float, sigma: float, hk: float) -> float:
    """Upper bound 16 sqrt(n) / (1 + sigma n^1.5 + 4 n hk)."""
    return scalability_point(n, sigma, hk).tau


def tau_envelope(n: float, sigma: float, dyn: LinkDynamics) -> tuple[float, float]:
    """``(tau_1, tau_inf)``: the bound at k = 1 and in the k -> inf limit."""
    return (
        tau_upper(n, sigma, binary_entropy(dyn.pi1)),
        tau_upper(n, sigma, conditional_entropy(dyn)),
    )


def delta_tau(n: float, sigma: float, dyn: LinkDynamics) -> float:
    t1, tinf = tau_envelope(n, sigma, dyn)
    return tinf - t1


def region_tau_bound(region, n: float, sigma: float, dyn: LinkDynamics, k: int) -> float:
    region = Region(region)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    _check_nonneg(sigma=sigma)
    base = k * (1.0 + sigma * n ** 1.5)
    if region in (Region.I, Region.III):
        extra = 4.0 * n
    elif region is Region.II:
        extra = 4.0 * n * (k - 1) * binary_entropy(dyn.alpha)
    elif region is Region.IV:
        extra = 4.0 * n * (k - 1) * binary_entropy(dyn.beta)
    else:
        raise RegionError("region V has no closed-form scalability bound")
    return 16.0 * k * math.sqrt(n) / (base + extra)


def optimality_residual(n: float, sigma: float, hk: float) -> float:
    """g(n) = 2 sigma n^1.5 + 4 n hk - 1; zero at the optimal size."""
    return 2.0 * sigma * n ** 1.5 + 4.0 * n * hk - 1.0


def solve_optimal_n(sigma: float, hk: float, rtol: float = 1e-12) -> float:
    """Unique positive root of ``optimality_residual``.

    Closed forms are used when one overhead vanishes; otherwise bisection on
    a doubling bracket (g is strictly increasing and g(0) = -1).
    """
    _check_nonneg(sigma=sigma, hk=hk)
    if sigma == 0.0 and hk == 0.0:
        raise NoOptimumError("sigma and hk are both zero: scalability has no finite optimum")
    if sigma == 0.0:
        return 1.0 / (4.0 * hk)
    if hk == 0.0:
        return (1.0 / (2.0 * sigma)) ** (2.0 / 3.0)

    lo, hi = 0.0, 1.0
    while optimality_residual(hi, sigma, hk) <= 0.0:
        lo, hi = hi, 2.0 * hi
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if optimality_residual(mid, sigma, hk) > 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


class Scenario(str, enum.Enum):
    CONTENTION_FREE = "contention_free"
    CONSENSUS_FREE = "consensus_free"


def n_star_approx(scenario, sigma: float = 0.0, hk: float = 0.0) -> float:
    """Extreme-scenario approximations of the optimal size.

    ``contention_free`` returns the customary ``1 / hk`` approximation;
    the exact root with sigma = 0 is ``1 / (4 hk)``.
    """
    scenario = Scenario(scenario)
    if scenario is Scenario.CONTENTION_FREE:
        if not hk > 0.0:
            raise ValueError("contention-free approximation needs hk > 0")
        return 1.0 / hk
    if not sigma > 0.0:
        raise ValueError("consensus-free approximation needs sigma > 0")
    return (1.0 / (2.0 * sigma)) ** (2.0 / 3.0)


@dataclass(frozen=True)
class OptimumReport:
    n_star: float
    tau_max: float
    tau_max_8sqrt: float
    n_star_contention_free: float | None
    n_star_consensus_free: float | None


def max_scalability(sigma: float, hk: float) -> float:
    """tau_upper evaluated at the optimal size."""
    return tau_upper(solve_optimal_n(sigma, hk), sigma, hk)


def optimum_report(sigma: float, hk: float) -> OptimumReport:
    n_star = solve_optimal_n(sigma, hk)
    return OptimumReport(
        n_star=n_star,
        tau_max=tau_upper(n_star, sigma, hk),
        tau_max_8sqrt=8.0 * math.sqrt(n_star),
        n_star_contention_free=n_star_approx(Scenario.CONTENTION_FREE, hk=hk) if hk > 0 else None,
        n_star_consensus_free=(
            n_star_approx(Scenario.CONSENSUS_FREE, sigma=sigma) if sigma > 0 else None
        ),
    )


def log_grid(n_min: float, n_max: float, points: int) -> list[float]:
    if not (1 <= n_min <= n_max) or points < 1:
        raise ValueError(f"invalid grid: n_min={n_min}, n_max={n_max}, points={points}")
    if points == 1 or n_min == n_max:
        return [float(n_min)]
    a, b = math.log10(n_min), math.log10(n_max)
    return [10 ** (a + (b - a) * i / (points - 1)) for i in range(points)]
