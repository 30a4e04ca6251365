"""M x P wraparound-grid constellation with per-link ON/OFF states.

Satellite ``(x, y)`` (plane ``x``, slot ``y``) has flat index ``x * M + y``.
Each satellite owns two undirected links: link ``2*i`` goes "east" to
``(x+1 mod P, y)`` and link ``2*i + 1`` goes "north" to ``(x, y+1 mod M)``.
Every physical ISL is therefore stored exactly once and there are ``2n``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .link_dynamics import LinkDynamics

EAST = 0
NORTH = 1


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class ConstellationGeometry:
    planes: int
    sats_per_plane: int
    inclination_deg: float = 53.0
    phasing: int = 0

    def __post_init__(self):
        if self.planes < 3 or self.sats_per_plane < 3:
            raise GeometryError(
                f"need at least 3 planes and 3 satellites per plane, got "
                f"P={self.planes}, M={self.sats_per_plane}"
            )
        if not (0 <= self.phasing < self.planes):
            raise GeometryError(f"phasing must lie in [0, {self.planes - 1}], got {self.phasing}")

    @property
    def n(self) -> int:
        return self.planes * self.sats_per_plane

    @property
    def n_links(self) -> int:
        return 2 * self.n

    @property
    def is_square(self) -> bool:
        return self.planes == self.sats_per_plane

    @classmethod
    def square(cls, n: int, **kw) -> "ConstellationGeometry":
        m = int(round(n ** 0.5))
        if m * m != n:
            raise GeometryError(f"n={n} is not a perfect square")
        return cls(planes=m, sats_per_plane=m, **kw)

    def index(self, x: int, y: int) -> int:
        return (x % self.planes) * self.sats_per_plane + (y % self.sats_per_plane)

    def coords(self, i: int) -> tuple[int, int]:
        return divmod(i, self.sats_per_plane)

    def neighbors(self, i: int) -> list[int]:
        x, y = self.coords(i)
        return [
            self.index(x + 1, y),
            self.index(x - 1, y),
            self.index(x, y + 1),
            self.index(x, y - 1),
        ]

    @cached_property
    def link_endpoints(self) -> np.ndarray:
        """``(2n, 2)`` array of (u, v) for every link index."""
        P, M = self.planes, self.sats_per_plane
        idx = np.arange(self.n)
        x, y = np.divmod(idx, M)
        east = ((x + 1) % P) * M + y
        north = x * M + (y + 1) % M
        ends = np.empty((2 * self.n, 2), dtype=np.int64)
        ends[0::2, 0] = idx
        ends[0::2, 1] = east
        ends[1::2, 0] = idx
        ends[1::2, 1] = north
        return ends

    def link_index(self, i: int, direction: int) -> int:
        return 2 * i + direction


@dataclass
class TorusTopology:
    geometry: ConstellationGeometry
    link_states: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.link_states = np.asarray(self.link_states, dtype=bool)
        if self.link_states.shape != (self.geometry.n_links,):
            raise ValueError(
                f"expected {self.geometry.n_links} link states, got shape {self.link_states.shape}"
            )

    @property
    def n(self) -> int:
        return self.geometry.n

    def copy(self) -> "TorusTopology":
        return TorusTopology(self.geometry, self.link_states.copy())

    def set_all(self, on: bool) -> None:
        self.link_states[:] = on

    def set_link(self, i: int, j: int, on: bool) -> None:
        """Set the state of the link between adjacent satellites ``i`` and ``j``."""
        g = self.geometry
        for a, b in ((i, j), (j, i)):
            xa, ya = g.coords(a)
            if g.index(xa + 1, ya) == b:
                self.link_states[g.link_index(a, EAST)] = on
                return
            if g.index(xa, ya + 1) == b:
                self.link_states[g.link_index(a, NORTH)] = on
                return
        raise ValueError(f"satellites {i} and {j} are not adjacent")

    def on_degree(self) -> np.ndarray:
        ends = self.geometry.link_endpoints[self.link_states]
        return np.bincount(ends.ravel(), minlength=self.n)

    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.geometry.link_endpoints[self.link_states]:
            adj[u].append(int(v))
            adj[v].append(int(u))
        return adj

    def csgraph(self):
        """Symmetric sparse adjacency over ON links."""
        ends = self.geometry.link_endpoints[self.link_states]
        n = self.n
        rows = np.concatenate([ends[:, 0], ends[:, 1]])
        cols = np.concatenate([ends[:, 1], ends[:, 0]])
        data = np.ones(rows.size, dtype=np.int8)
        return coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()


def build_torus(geometry: ConstellationGeometry) -> TorusTopology:
    """All-ON torus."""
    return TorusTopology(geometry, np.ones(geometry.n_links, dtype=bool))


def step(topology: TorusTopology, dyn: LinkDynamics, rng: np.random.Generator) -> TorusTopology:
    """Advance every link one slot, in place, and return the topology.

    Exactly one uniform draw per link is consumed, in ascending link
    index order: an ON link fails if its draw is < alpha, an OFF link
    recovers if its draw is < beta.
    """
    u = rng.random(topology.link_states.size)
    s = topology.link_states
    topology.link_states = np.where(s, u >= dyn.alpha, u < dyn.beta)
    return topology


def on_link_count(topology: TorusTopology) -> int:
    return int(np.count_nonzero(topology.link_states))


def connectivity(topology: TorusTopology) -> float:
    """Largest-component size over n, counting only ON links."""
    _, labels = connected_components(topology.csgraph(), directed=False)
    return int(np.bincount(labels).max()) / topology.n


class UnionFind:
    """Disjoint sets with path halving and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return True

    def largest(self) -> int:
        return max(self.size[r] for r in range(len(self.parent)) if self.find(r) == r)


def largest_component_union_find(topology: TorusTopology) -> int:
    uf = UnionFind(topology.n)
    for u, v in topology.geometry.link_endpoints[topology.link_states]:
        uf.union(int(u), int(v))
    return uf.largest()


def largest_component_bfs(topology: TorusTopology) -> int:
    adj = topology.adjacency()
    seen = [False] * topology.n
    best = 0
    for s in range(topology.n):
        if seen[s]:
            continue
        seen[s] = True
        q = deque([s])
        size = 0
        while q:
            u = q.popleft()
            size += 1
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    q.append(v)
        best = max(best, size)
    return best
