"""Undirected graphs, random generation, and connectivity machinery.

Graphs are vertex sets 0..n-1 with an edge array; generation and
induced-subgraph restriction are vectorized so that ten-thousand-trial
connectivity experiments stay cheap. Connectivity uses union-find;
a BFS component routine is kept alongside as an independent oracle.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional, Sequence

import numpy as np

__all__ = [
    "Graph",
    "er_generate",
    "complete_graph",
    "star_graph",
    "induced_subgraph",
    "is_connected",
    "components_bfs",
    "connectivity_experiment",
]


@dataclass(frozen=True, eq=False)
class Graph:
    """Simple undirected graph on vertices 0..n-1.

    ``edges`` is an (E, 2) int64 array with each row (u, v), u < v,
    rows unique. No self-loops, no parallel edges.
    """

    n: int
    edges: np.ndarray

    def __post_init__(self) -> None:
        if self.n < 0:
            raise ValueError("vertex count must be >= 0")
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, "edges", e)
        if e.size:
            if e.min() < 0 or e.max() >= self.n:
                raise ValueError("edge endpoint out of range")
            if np.any(e[:, 0] >= e[:, 1]):
                raise ValueError("edges must be stored as (u, v) with u < v")
            # Scalar key per edge; generators emit sorted arrays, so the
            # common case is a linear scan rather than a row sort.
            keys = e[:, 0] * self.n + e[:, 1]
            if np.any(np.diff(keys) <= 0) and np.unique(keys).size != keys.size:
                raise ValueError("duplicate edges")

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    def edge_set(self) -> frozenset[tuple[int, int]]:
        return frozenset((int(u), int(v)) for u, v in self.edges)

    def neighbors(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges.tolist():
            adj[u].append(v)
            adj[v].append(u)
        return adj

    @staticmethod
    def from_edge_list(n: int, pairs: Iterable[tuple[int, int]]) -> "Graph":
        norm = sorted({(min(u, v), max(u, v)) for u, v in pairs})
        for u, v in norm:
            if u == v:
                raise ValueError("self-loop")
        return Graph(n, np.array(norm, dtype=np.int64).reshape(-1, 2))


@lru_cache(maxsize=16)
def _pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    iu, iv = np.triu_indices(n, k=1)
    return iu.astype(np.int64), iv.astype(np.int64)


def er_generate(n: int, p: float, rng: np.random.Generator) -> Graph:
    """Erdos-Renyi G(n, p): each of the C(n, 2) pairs kept independently."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be in [0, 1]")
    iu, iv = _pairs(n)
    keep = rng.random(iu.size) < p
    return Graph(n, np.column_stack((iu[keep], iv[keep])))


def complete_graph(n: int) -> Graph:
    iu, iv = _pairs(n)
    return Graph(n, np.column_stack((iu, iv)))


def star_graph(n: int) -> Graph:
    """Vertex 0 joined to every other vertex."""
    if n < 1:
        raise ValueError("star graph needs at least one vertex")
    others = np.arange(1, n, dtype=np.int64)
    return Graph(n, np.column_stack((np.zeros_like(others), others)))


def induced_subgraph(g: Graph, subset: Sequence[int]) -> Graph:
    """Subgraph induced by ``subset``, relabeled to 0..len(subset)-1.

    Vertices keep the order of the sorted subset.
    """
    nodes = np.unique(np.asarray(list(subset), dtype=np.int64))
    if nodes.size and (nodes.min() < 0 or nodes.max() >= g.n):
        raise ValueError("subset vertex out of range")
    member = np.zeros(g.n, dtype=bool)
    member[nodes] = True
    if g.num_edges:
        keep = member[g.edges[:, 0]] & member[g.edges[:, 1]]
        kept = g.edges[keep]
        relabeled = np.searchsorted(nodes, kept)
    else:
        relabeled = np.empty((0, 2), dtype=np.int64)
    return Graph(int(nodes.size), relabeled)


class _UnionFind:
    __slots__ = ("parent", "size", "count")

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n
        self.count = n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]  # path halving
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.count -= 1


def is_connected(g: Graph) -> bool:
    """True iff the graph has one connected component.

    Empty and single-vertex graphs count as connected.
    """
    if g.n <= 1:
        return True
    uf = _UnionFind(g.n)
    for u, v in g.edges.tolist():
        uf.union(u, v)
        if uf.count == 1:
            return True
    return uf.count == 1


def components_bfs(g: Graph, restrict: Optional[Iterable[int]] = None) -> list[set[int]]:
    """Connected components by BFS, in original vertex labels.

    With ``restrict`` given, vertices outside it are treated as removed
    (components of the induced subgraph, without relabeling).
    """
    if restrict is None:
        allowed = set(range(g.n))
    else:
        allowed = set(int(v) for v in restrict)
        if any(not 0 <= v < g.n for v in allowed):
            raise ValueError("restrict vertex out of range")
    adj: dict[int, list[int]] = {v: [] for v in allowed}
    for u, v in g.edges.tolist():
        if u in allowed and v in allowed:
            adj[u].append(v)
            adj[v].append(u)
    seen: set[int] = set()
    out: list[set[int]] = []
    for start in sorted(allowed):
        if start in seen:
            continue
        comp = {start}
        queue = deque([start])
        while queue:
            x = queue.popleft()
            for y in adj[x]:
                if y not in comp:
                    comp.add(y)
                    queue.append(y)
        seen |= comp
        out.append(comp)
    return out


def connectivity_experiment(
    n: int,
    p: float,
    m: int,
    trials: int,
    rng: np.random.Generator,
) -> float:
    """Fraction of trials in which a random induced subgraph disconnects.

    Each trial draws a fresh G(n, p) and a uniform m-subset of its
    vertices, and tests the induced subgraph for connectivity.
    """
    if not 0 <= m <= n:
        raise ValueError("m must be in [0, n]")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    disconnected = 0
    for _ in range(trials):
        g = er_generate(n, p, rng)
        subset = rng.choice(n, size=m, replace=False)
        if not is_connected(induced_subgraph(g, subset)):
            disconnected += 1
    return disconnected / trials
