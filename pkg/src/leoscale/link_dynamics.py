"""Two-state Markov model of a single inter-satellite link.

State 1 is ON, state 0 is OFF.  ``alpha`` is the per-slot failure
probability (ON -> OFF) and ``beta`` the per-slot recovery probability
(OFF -> ON).  All functions here are pure.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

_LN2 = math.log(2.0)


class RegionError(ValueError):
    """Raised when a closed-form approximation does not exist for a region."""


class Region(str, enum.Enum):
    I = "I"
    II = "II"
    III = "III"
    IV = "IV"
    V = "V"


@dataclass(frozen=True)
class LinkDynamics:
    alpha: float
    beta: float

    def __post_init__(self):
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0) or not math.isfinite(v):
                raise ValueError(f"{name} must lie strictly inside (0, 1), got {v!r}")

    @property
    def mu(self) -> float:
        """Memory parameter, the second eigenvalue of the transition matrix."""
        return 1.0 - self.alpha - self.beta

    @property
    def pi1(self) -> float:
        return self.beta / (self.alpha + self.beta)

    @property
    def pi0(self) -> float:
        return self.alpha / (self.alpha + self.beta)

    def transition_matrix(self) -> np.ndarray:
        a, b = self.alpha, self.beta
        return np.array([[1.0 - b, b], [a, 1.0 - a]])


class _Infinite:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INFINITE"

    def __reduce__(self):
        return (_Infinite, ())


INFINITE = _Infinite()


@dataclass(frozen=True)
class MaintenancePolicy:
    """ISL maintenance period in slots, or ``INFINITE`` for the k -> inf limit."""

    period: Union[int, _Infinite]

    def __post_init__(self):
        if self.period is INFINITE:
            return
        if isinstance(self.period, bool) or not isinstance(self.period, (int, np.integer)):
            raise TypeError(f"period must be a positive int or INFINITE, got {self.period!r}")
        if self.period < 1:
            raise ValueError(f"period must be >= 1, got {self.period}")

    @property
    def is_infinite(self) -> bool:
        return self.period is INFINITE

    @classmethod
    def parse(cls, value) -> "MaintenancePolicy":
        """Accept an int, ``INFINITE``, or the strings ``inf``/``infinite``."""
        if value is INFINITE:
            return cls(INFINITE)
        if isinstance(value, str):
            if value.strip().lower() in ("inf", "infinite", "infinity"):
                return cls(INFINITE)
            return cls(int(value))
        if isinstance(value, float):
            if math.isinf(value):
                return cls(INFINITE)
            if not value.is_integer():
                raise ValueError(f"period must be integral, got {value}")
            return cls(int(value))
        return cls(value)

    def __str__(self):
        return "inf" if self.is_infinite else str(self.period)


@dataclass(frozen=True)
class RegionThresholds:
    eps1: float = 1e-6
    eps2: float = 1e-4
    eps3: float = 0.7
    eps4: float = 0.9

    def __post_init__(self):
        if not (0.0 < self.eps1 < self.eps2 < self.eps3 < self.eps4 < 1.0):
            raise ValueError(
                "thresholds must satisfy 0 < eps1 < eps2 < eps3 < eps4 < 1, got "
                f"{(self.eps1, self.eps2, self.eps3, self.eps4)}"
            )


def binary_entropy(x: float) -> float:
    """Binary entropy in bits, with h(0) = h(1) = 0."""
    if not (0.0 <= x <= 1.0):
        raise ValueError(f"binary_entropy needs x in [0, 1], got {x!r}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -(x * math.log(x) + (1.0 - x) * math.log1p(-x)) / _LN2


def steady_state(dyn: LinkDynamics) -> tuple[float, float]:
    """Return ``(pi0, pi1)``."""
    return dyn.pi0, dyn.pi1


def k_step_transition(dyn: LinkDynamics, k: int) -> np.ndarray:
    """Closed-form k-step transition matrix, rows indexed by the current state."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    a, b = dyn.alpha, dyn.beta
    s = a + b
    muk = dyn.mu ** k
    return np.array(
        [
            [(a + b * muk) / s, (b - b * muk) / s],
            [(a - a * muk) / s, (b + a * muk) / s],
        ]
    )


def belief(dyn: LinkDynamics, prior_state: int, k: int) -> float:
    """P(ON now | state ``prior_state`` k slots ago)."""
    if prior_state not in (0, 1):
        raise ValueError(f"prior_state must be 0 or 1, got {prior_state!r}")
    return float(k_step_transition(dyn, k)[prior_state, 1])


def conditional_entropy(dyn: LinkDynamics) -> float:
    """Entropy rate H(X2 | X1) of the stationary chain, i.e. the k -> inf bound."""
    return consensus_bound_from_rates(dyn.alpha, dyn.beta, INFINITE)


def consensus_lower_bound(dyn: LinkDynamics, policy) -> float:
    """Per-slot lower bound on the consensus overhead of one ISL, in bits.

    ``policy`` may be a :class:`MaintenancePolicy` or anything
    :meth:`MaintenancePolicy.parse` accepts.
    """
    return consensus_bound_from_rates(dyn.alpha, dyn.beta, policy)


def consensus_bound_from_rates(alpha: float, beta: float, policy) -> float:
    """:func:`consensus_lower_bound` for raw rates, allowing the closed interval.

    Estimated rates can hit 0 or 1; ``alpha + beta`` must still be positive.
    """
    if not (0.0 <= alpha <= 1.0 and 0.0 <= beta <= 1.0):
        raise ValueError(f"rates must lie in [0, 1], got alpha={alpha!r}, beta={beta!r}")
    if alpha + beta == 0.0:
        raise ValueError("alpha + beta must be positive")
    if not isinstance(policy, MaintenancePolicy):
        policy = MaintenancePolicy.parse(policy)
    pi1 = beta / (alpha + beta)
    pi0 = alpha / (alpha + beta)
    if alpha + beta == 1.0:
        rate = binary_entropy(pi1)  # memoryless chain: the rate is the marginal entropy
    else:
        rate = pi1 * binary_entropy(alpha) + pi0 * binary_entropy(beta)
    if policy.is_infinite:
        return rate
    k = policy.period
    return (binary_entropy(pi1) + (k - 1) * rate) / k


def classify_region(dyn: LinkDynamics, thr: RegionThresholds = RegionThresholds()) -> Region:
    a, b = dyn.alpha, dyn.beta
    e1, e2, e3, e4 = thr.eps1, thr.eps2, thr.eps3, thr.eps4
    if e1 <= a <= e2 and e1 <= b <= e2:
        return Region.I
    if e1 <= a <= e2 and e2 < b <= e4:
        return Region.II
    if e3 <= a <= e4 and e3 <= b <= e4:
        return Region.III
    if e2 < a <= e4 and e1 < b < e2:
        return Region.IV
    return Region.V


def region_consensus_approx(region, dyn: LinkDynamics, k: int) -> float:
    """Region-wise approximation of the finite-k consensus bound."""
    region = Region(region)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if region in (Region.I, Region.III):
        return 1.0 / k
    if region is Region.II:
        return (k - 1) / k * binary_entropy(dyn.alpha)
    if region is Region.IV:
        return (k - 1) / k * binary_entropy(dyn.beta)
    raise RegionError("region V has no closed-form consensus approximation")
