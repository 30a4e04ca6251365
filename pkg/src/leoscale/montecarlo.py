"""Monte-Carlo replication of the shortest-hop scalability experiment.

One replication: build an all-ON square torus, evolve the links for a
warm-up period, then for every measurement slot evolve once and route each
source-destination pair over the ON links with perfect topology knowledge.
The hop counts and the observed link transitions are turned into a
simulated scalability value through the same bound used analytically.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Literal, Sequence

import numpy as np

from .link_dynamics import (
    LinkDynamics,
    MaintenancePolicy,
    consensus_bound_from_rates,
    consensus_lower_bound,
)
from .routing import hop_matrix, uniform_pairs
from .scalability import tau_upper
from .topology import (
    ConstellationGeometry,
    GeometryError,
    build_torus,
    connectivity,
    on_link_count,
    step,
)

Estimation = Literal["pooled", "replication"]


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    warmup_slots: int = 100
    measure_slots: int = 200
    replications: int = 50
    master_seed: int = 0
    k: int = 10
    sigma: float = 1e-12
    refresh_traffic_each_slot: bool = True
    estimation: Estimation = "pooled"

    def __post_init__(self):
        if self.warmup_slots < 1 or self.measure_slots < 1 or self.replications < 1:
            raise ValueError("warmup_slots, measure_slots and replications must all be >= 1")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not (self.sigma >= 0.0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be finite and >= 0, got {self.sigma!r}")
        if self.estimation not in ("pooled", "replication"):
            raise ValueError(f"estimation must be 'pooled' or 'replication', got {self.estimation!r}")
        if not (0 <= self.master_seed < 2 ** 64):
            raise ValueError("master_seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class TransitionCounts:
    n00: int = 0
    n01: int = 0
    n10: int = 0
    n11: int = 0

    def __add__(self, other: "TransitionCounts") -> "TransitionCounts":
        return TransitionCounts(
            self.n00 + other.n00, self.n01 + other.n01, self.n10 + other.n10, self.n11 + other.n11
        )

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.n00, self.n01, self.n10, self.n11)


@dataclass(frozen=True)
class ReplicationResult:
    n: int
    replication: int
    avg_hops: float
    reachable_fraction: float
    alpha_hat: float | None
    beta_hat: float | None
    hk_hat: float
    tau_sim: float
    mean_connectivity: float
    mean_on_links: float
    counts: TransitionCounts
    estimate_substituted: bool = False


def estimate_dynamics(transition_counts) -> tuple[float | None, float | None]:
    """Maximum-likelihood ``(alpha_hat, beta_hat)`` from pooled counts.

    ``transition_counts`` is ``(N00, N01, N10, N11)`` where ``Nij`` counts
    slot-to-slot moves from state i to state j.  An estimate whose
    denominator is zero is returned as ``None``.
    """
    if isinstance(transition_counts, TransitionCounts):
        transition_counts = transition_counts.as_tuple()
    n00, n01, n10, n11 = transition_counts
    if min(n00, n01, n10, n11) < 0:
        raise ValueError(f"transition counts must be non-negative, got {transition_counts}")
    alpha_hat = n10 / (n10 + n11) if n10 + n11 else None
    beta_hat = n01 / (n01 + n00) if n01 + n00 else None
    return alpha_hat, beta_hat


def estimated_hk(
    alpha_hat: float | None, beta_hat: float | None, k, fallback: LinkDynamics
) -> tuple[float, bool]:
    """Consensus bound of the estimated chain; missing estimates take ``fallback``'s.

    Returns ``(hk, substituted)``.
    """
    substituted = alpha_hat is None or beta_hat is None
    a = fallback.alpha if alpha_hat is None else alpha_hat
    b = fallback.beta if beta_hat is None else beta_hat
    if a + b == 0.0:
        # Both estimates zero: the chain looked frozen, nothing to build on.
        return consensus_lower_bound(fallback, k), True
    return consensus_bound_from_rates(a, b, k), substituted


def tau_from_measurement(n: float, sigma: float, avg_hops: float, hk_hat: float) -> float:
    """16 sqrt(n) / (1 + sigma n avg_hops + 4 n hk_hat)."""
    for name, v in (("n", n), ("sigma", sigma), ("avg_hops", avg_hops), ("hk_hat", hk_hat)):
        if not v >= 0:
            raise ValueError(f"{name} must be non-negative, got {v!r}")
    return 16.0 * math.sqrt(n) / (1.0 + sigma * n * avg_hops + 4.0 * n * hk_hat)


def replication_rng(master_seed: int, n: int, replication_index: int) -> np.random.Generator:
    """Independent stream keyed only on (master_seed, n, replication_index)."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(n, replication_index))
    return np.random.default_rng(ss)


def _count_transitions(prev: np.ndarray, new: np.ndarray) -> TransitionCounts:
    n11 = int(np.count_nonzero(prev & new))
    n10 = int(np.count_nonzero(prev & ~new))
    n01 = int(np.count_nonzero(~prev & new))
    return TransitionCounts(prev.size - n11 - n10 - n01, n01, n10, n11)


def run_replication(
    geometry: ConstellationGeometry,
    dyn: LinkDynamics,
    cfg: SimConfig,
    replication_index: int,
) -> ReplicationResult:
    if not geometry.is_square:
        raise GeometryError(
            f"simulation needs a square torus, got P={geometry.planes}, M={geometry.sats_per_plane}"
        )
    n = geometry.n
    rng = replication_rng(cfg.master_seed, n, replication_index)
    topo = build_torus(geometry)

    traffic = None if cfg.refresh_traffic_each_slot else uniform_pairs(n, rng)
    for _ in range(cfg.warmup_slots):
        step(topo, dyn, rng)

    counts = TransitionCounts()
    hop_total = 0
    reached_total = 0
    conn_total = 0.0
    on_total = 0
    hops = conn = None
    for _ in range(cfg.measure_slots):
        prev = topo.link_states
        step(topo, dyn, rng)
        slot_counts = _count_transitions(prev, topo.link_states)
        counts = counts + slot_counts
        if hops is None or slot_counts.n10 or slot_counts.n01:
            hops = hop_matrix(topo)
            conn = connectivity(topo)
        if cfg.refresh_traffic_each_slot:
            traffic = uniform_pairs(n, rng)
        h = hops[traffic.sources, traffic.destinations]
        ok = h >= 0
        hop_total += int(h[ok].sum())
        reached_total += int(ok.sum())
        conn_total += conn
        on_total += on_link_count(topo)

    samples = cfg.measure_slots * n
    avg_hops = hop_total / samples
    alpha_hat, beta_hat = estimate_dynamics(counts)
    hk_hat, substituted = estimated_hk(alpha_hat, beta_hat, cfg.k, dyn)
    return ReplicationResult(
        n=n,
        replication=replication_index,
        avg_hops=avg_hops,
        reachable_fraction=reached_total / samples,
        alpha_hat=alpha_hat,
        beta_hat=beta_hat,
        hk_hat=hk_hat,
        tau_sim=tau_from_measurement(n, cfg.sigma, avg_hops, hk_hat),
        mean_connectivity=conn_total / cfg.measure_slots,
        mean_on_links=on_total / cfg.measure_slots,
        counts=counts,
        estimate_substituted=substituted,
    )


@dataclass(frozen=True)
class SweepRecord:
    n: int
    tau_mean: float
    tau_std: float
    tau_analytic: float
    avg_hops: float
    reachable_fraction: float
    alpha_hat: float | None
    beta_hat: float | None
    counts: TransitionCounts
    replications: int

    CSV_COLUMNS = (
        "n",
        "tau_mean",
        "tau_std",
        "tau_analytic",
        "avg_hops",
        "reachable_fraction",
        "alpha_hat",
        "beta_hat",
    )

    def csv_row(self) -> list[str]:
        return [str(self.n)] + [
            _fmt(getattr(self, c)) for c in self.CSV_COLUMNS[1:]
        ]


def _fmt(v) -> str:
    if v is None:
        return "nan"
    return repr(float(v))


@dataclass
class SweepResult:
    records: list[SweepRecord]
    replications: list[ReplicationResult] = field(default_factory=list)
    config: SimConfig | None = None
    dyn: LinkDynamics | None = None

    def pooled_counts(self) -> TransitionCounts:
        total = TransitionCounts()
        for r in self.records:
            total = total + r.counts
        return total

    def pooled_estimate(self) -> tuple[float | None, float | None]:
        """Transition estimates pooled over every replication at every n."""
        return estimate_dynamics(self.pooled_counts())

    def to_csv(self) -> str:
        lines = [",".join(SweepRecord.CSV_COLUMNS)]
        lines += [",".join(r.csv_row()) for r in self.records]
        return "\n".join(lines) + "\n"


def _check_square(n_list: Iterable[int]) -> list[int]:
    out = []
    for n in n_list:
        m = math.isqrt(int(n)) if int(n) >= 0 else -1
        if int(n) != n or m * m != n or m < 3:
            raise ValueError(f"sweep sizes must be perfect squares >= 9, got n={n}")
        out.append(int(n))
    return out


def sweep(
    n_list: Sequence[int],
    dyn: LinkDynamics,
    cfg: SimConfig,
    threads: int | None = None,
) -> SweepResult:
    """Run ``cfg.replications`` independent replications at every n.

    Output is independent of ``threads``: each replication owns a stream
    keyed on (seed, n, index) and results are reduced in index order.
    """
    sizes = _check_square(n_list)
    tasks = [(n, r) for n in sizes for r in range(cfg.replications)]

    def work(task):
        n, r = task
        return run_replication(ConstellationGeometry.square(n), dyn, cfg, r)

    if threads == 1:
        results = [work(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, tasks))

    hk_true = consensus_lower_bound(dyn, cfg.k)
    records, reps_out = [], []
    for i, n in enumerate(sizes):
        reps = results[i * cfg.replications : (i + 1) * cfg.replications]
        counts = TransitionCounts()
        for rep in reps:
            counts = counts + rep.counts
        alpha_hat, beta_hat = estimate_dynamics(counts)
        if cfg.estimation == "pooled":
            hk, substituted = estimated_hk(alpha_hat, beta_hat, cfg.k, dyn)
            reps = [
                replace(
                    rep,
                    hk_hat=hk,
                    tau_sim=tau_from_measurement(n, cfg.sigma, rep.avg_hops, hk),
                    estimate_substituted=substituted,
                )
                for rep in reps
            ]
        taus = np.array([rep.tau_sim for rep in reps])
        records.append(
            SweepRecord(
                n=n,
                tau_mean=float(taus.mean()),
                tau_std=float(taus.std(ddof=1)) if len(taus) > 1 else 0.0,
                tau_analytic=tau_upper(n, cfg.sigma, hk_true),
                avg_hops=float(np.mean([rep.avg_hops for rep in reps])),
                reachable_fraction=float(np.mean([rep.reachable_fraction for rep in reps])),
                alpha_hat=alpha_hat,
                beta_hat=beta_hat,
                counts=counts,
                replications=len(reps),
            )
        )
        reps_out.extend(reps)
    return SweepResult(records, reps_out, cfg, dyn)


@dataclass(frozen=True)
class FitResult:
    a_hat: float
    b_hat: float
    residual: float
    clamped: bool
    points: int = 0
    substituted: bool = False

    def to_dict(self) -> dict:
        return {
            "a_hat": self.a_hat,
            "b_hat": self.b_hat,
            "residual": self.residual,
            "clamped": self.clamped,
            "points": self.points,
            "substituted_dynamics": self.substituted,
        }


def _solve_normal(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    # Columns differ by many orders of magnitude; equilibrate before forming X^T X.
    scale = np.linalg.norm(X, axis=0)
    if np.any(scale == 0):
        raise FitError("a regressor column is identically zero")
    Xs = X / scale
    A = Xs.T @ Xs
    if np.linalg.cond(A) > 1e12:
        raise FitError("normal equations are singular; need at least two distinct sizes")
    return np.linalg.solve(A, Xs.T @ y) / scale


def fit_overheads(
    sweep_result: SweepResult | Sequence[SweepRecord],
    k,
    dyn: LinkDynamics,
    hk_source: Literal["estimated", "configured"] = "estimated",
) -> FitResult:
    """Least-squares fit of f(n) = 16 sqrt(n) / (1 + a n L + 4 b n Hk).

    The model is linear in (a, b) after ``y = 16 sqrt(n) / tau - 1``.  With
    ``hk_source="estimated"`` each point's Hk comes from its estimated
    transition probabilities (``dyn`` fills in missing estimates); with
    ``"configured"`` every point uses ``dyn``.  Negative coefficients are
    clamped to zero and the other one is refitted alone.
    """
    records = getattr(sweep_result, "records", sweep_result)
    records = list(records)
    if len({r.n for r in records}) < 2:
        raise FitError("fit needs at least two distinct constellation sizes")
    n = np.array([float(r.n) for r in records])
    L = np.array([r.avg_hops for r in records])
    tau = np.array([r.tau_mean for r in records])
    if np.any(tau <= 0):
        raise FitError("scalability values must be positive")
    substituted = False
    hk = np.empty(len(records))
    for i, r in enumerate(records):
        if hk_source == "configured":
            hk[i] = consensus_lower_bound(dyn, k)
        else:
            hk[i], sub = estimated_hk(r.alpha_hat, r.beta_hat, k, dyn)
            substituted |= sub
    y = 16.0 * np.sqrt(n) / tau - 1.0
    X = np.column_stack([n * L, 4.0 * n * hk])
    a, b = _solve_normal(X, y)
    clamped = False
    if a < 0 or b < 0:
        clamped = True
        if a < 0 and b < 0:
            a = b = 0.0
        elif a < 0:
            a, b = 0.0, max(0.0, float(X[:, 1] @ y / (X[:, 1] @ X[:, 1])))
        else:
            a, b = max(0.0, float(X[:, 0] @ y / (X[:, 0] @ X[:, 0]))), 0.0
    r = y - X @ np.array([a, b])
    return FitResult(float(a), float(b), float(r @ r), clamped, len(records), substituted)


@dataclass(frozen=True)
class TrajectoryPoint:
    slot: int
    on_links: int
    connectivity: float


def trajectory(
    geometry: ConstellationGeometry, dyn: LinkDynamics, total_slots: int, seed: int = 0
) -> list[TrajectoryPoint]:
    """ON-link count and connectivity after each of ``total_slots`` steps from all-ON."""
    if total_slots < 1:
        raise ValueError(f"total_slots must be >= 1, got {total_slots}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    topo = build_torus(geometry)
    out = []
    for t in range(1, total_slots + 1):
        step(topo, dyn, rng)
        out.append(TrajectoryPoint(t, on_link_count(topo), connectivity(topo)))
    return out


def lag1_autocorrelation(x) -> float:
    x = np.asarray(x, dtype=float)
    d = x - x.mean()
    denom = float(d @ d)
    if denom == 0.0:
        return 0.0
    return float(d[:-1] @ d[1:]) / denom


def trajectory_csv(points: Sequence[TrajectoryPoint]) -> str:
    lines = ["slot,on_links,connectivity"]
    lines += [f"{p.slot},{p.on_links},{p.connectivity!r}" for p in points]
    return "\n".join(lines) + "\n"

