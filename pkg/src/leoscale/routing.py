"""Hop counts on the torus and uniform source-destination traffic."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.sparse.csgraph import shortest_path

from .topology import ConstellationGeometry, GeometryError, TorusTopology

UNREACHABLE = None
"""Returned by :func:`shortest_hops` when no ON path joins the pair."""


@dataclass(frozen=True)
class TrafficPattern:
    sources: np.ndarray
    destinations: np.ndarray

    def __post_init__(self):
        if np.any(self.sources == self.destinations):
            raise ValueError("traffic pattern contains a self-pair")

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return list(zip(self.sources.tolist(), self.destinations.tolist()))

    def __len__(self):
        return len(self.sources)


def _side(n: int) -> int:
    m = math.isqrt(n)
    if m * m != n:
        raise ValueError(f"n={n} is not a perfect square")
    return m


def analytic_hop_distance(i: int, j: int, m: int) -> int:
    """Minimum hop count between satellites ``i`` and ``j`` on an all-ON m x m torus."""
    xi, yi = divmod(i, m)
    xj, yj = divmod(j, m)
    dx, dy = abs(xi - xj), abs(yi - yj)
    return min(dx, m - dx) + min(dy, m - dy)


def geometry_hop_distance(geometry: ConstellationGeometry, i: int, j: int) -> int:
    if not geometry.is_square:
        raise GeometryError(
            f"analytic hop distance needs a square torus, got P={geometry.planes}, "
            f"M={geometry.sats_per_plane}"
        )
    return analytic_hop_distance(i, j, geometry.planes)


def torus_distance_matrix(m: int) -> np.ndarray:
    """All-pairs analytic distances on the all-ON m x m torus."""
    r = np.arange(m)
    d1 = np.abs(r[:, None] - r[None, :])
    d1 = np.minimum(d1, m - d1)
    return (d1[:, None, :, None] + d1[None, :, None, :]).reshape(m * m, m * m)


def analytic_avg_hops_exact(n: int) -> Fraction:
    if n < 4:
        raise ValueError(f"n must be >= 4, got {n}")
    m = _side(n)
    if m % 2:
        return Fraction(m, 2)
    return Fraction(n * m, 2 * (n - 1))


def analytic_avg_hops(n: int) -> float:
    """Mean shortest-hop distance under uniform traffic on the all-ON square torus."""
    return float(analytic_avg_hops_exact(n))


def shortest_hops(topology: TorusTopology, src: int, dst: int):
    """Breadth-first hop count over ON links, or ``UNREACHABLE``."""
    if src == dst:
        return 0
    adj = topology.adjacency()
    dist = {src: 0}
    q = deque([src])
    while q:
        u = q.popleft()
        for v in adj[u]:
            if v not in dist:
                if v == dst:
                    return dist[u] + 1
                dist[v] = dist[u] + 1
                q.append(v)
    return UNREACHABLE


def hop_matrix(topology: TorusTopology, sources=None) -> np.ndarray:
    """Hop counts from ``sources`` (default all) to every satellite.

    Unreachable entries are ``-1``.  A fully ON square torus short-cuts to
    the closed form, which is exact there.
    """
    g = topology.geometry
    if g.is_square and topology.link_states.all():
        full = torus_distance_matrix(g.planes)
        return full if sources is None else full[np.asarray(sources)]
    d = shortest_path(topology.csgraph(), directed=False, unweighted=True, indices=sources)
    d = np.atleast_2d(d)
    out = np.full(d.shape, -1, dtype=np.int64)
    finite = np.isfinite(d)
    out[finite] = d[finite].astype(np.int64)
    return out


def uniform_pairs(n: int, rng: np.random.Generator) -> TrafficPattern:
    """Each satellite sources one packet to a distinct destination, no self-pairs.

    Permutations are redrawn until one has no fixed point, which makes the
    result uniform over derangements (about e draws on average).
    """
    if n < 2:
        raise ValueError(f"uniform traffic needs n >= 2, got {n}")
    idx = np.arange(n)
    while True:
        dest = rng.permutation(n)
        if not np.any(dest == idx):
            return TrafficPattern(idx, dest)


def measured_avg_hops(topology: TorusTopology, traffic: TrafficPattern) -> tuple[float, float]:
    """``(avg_hops, reachable_fraction)``; unreachable pairs add 0 hops.

    Both are normalised by the number of pairs.
    """
    hops = hop_matrix(topology)[traffic.sources, traffic.destinations]
    reached = hops >= 0
    k = len(traffic)
    return float(hops[reached].sum()) / k, float(reached.sum()) / k
