"""Graph to simplicial complex lifting: clique lifting for structure, sum lifting for features."""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Iterator, Sequence

import numpy as np

from .complex import SimplicialComplex
from .errors import CliqueSizeError, ComplexError, ShapeError

__all__ = [
    "FeaturedGraph",
    "FeatureStore",
    "DEFAULT_CLIQUE_CEILING",
    "maximal_cliques",
    "clique_lift",
    "feature_lift",
    "one_skeleton",
]

DEFAULT_CLIQUE_CEILING = 25


def _canonical_edges(edges: Iterable[Sequence[int]], n_nodes: int) -> np.ndarray:
    arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
    arr = arr.reshape(-1, 2)
    if arr.size and (arr.min() < 0 or arr.max() >= n_nodes):
        raise ComplexError(f"edge endpoint outside [0, {n_nodes})")
    loops = arr[:, 0] == arr[:, 1]
    if loops.any():
        v = int(arr[loops][0, 0])
        raise ComplexError(f"self-loop at node {v}")
    arr = np.sort(arr, axis=1)
    return np.unique(arr, axis=0) if len(arr) else arr


@dataclass(frozen=True, eq=False)
class FeaturedGraph:
    """Undirected graph with optional node features.

    Edges are canonicalized on construction: each pair is stored once as
    ``(u, v)`` with ``u < v``, rows sorted.
    """

    n_nodes: int
    edges: np.ndarray
    node_features: np.ndarray | None = None
    edge_features: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "edges", _canonical_edges(self.edges, self.n_nodes))
        if self.node_features is not None:
            feats = np.asarray(self.node_features)
            if feats.ndim != 2 or feats.shape[0] != self.n_nodes:
                raise ShapeError(
                    f"node_features must be ({self.n_nodes}, d), got {feats.shape}"
                )
            object.__setattr__(self, "node_features", feats)

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    def adjacency(self) -> list[set[int]]:
        adj: list[set[int]] = [set() for _ in range(self.n_nodes)]
        for u, v in self.edges.tolist():
            adj[u].add(v)
            adj[v].add(u)
        return adj


@dataclass(frozen=True, eq=False)
class FeatureStore:
    """Per-rank feature matrices ``H^(r)`` sharing one width."""

    features: tuple[np.ndarray, ...]

    def __getitem__(self, r: int) -> np.ndarray:
        return self.features[r]

    def __len__(self) -> int:
        return len(self.features)

    @property
    def max_rank(self) -> int:
        return len(self.features) - 1

    @property
    def width(self) -> int:
        return self.features[0].shape[1]


def _degeneracy_order(adj: list[set[int]]) -> list[int]:
    degree = [len(a) for a in adj]
    max_deg = max(degree, default=0)
    buckets: list[set[int]] = [set() for _ in range(max_deg + 1)]
    for v, d in enumerate(degree):
        buckets[d].add(v)
    removed = [False] * len(adj)
    order = []
    lo = 0
    for _ in range(len(adj)):
        lo = max(lo - 1, 0)
        while not buckets[lo]:
            lo += 1
        v = buckets[lo].pop()
        removed[v] = True
        order.append(v)
        for u in adj[v]:
            if not removed[u]:
                buckets[degree[u]].discard(u)
                degree[u] -= 1
                buckets[degree[u]].add(u)
    return order


def _expand(clique: list[int], cand: set[int], excl: set[int], adj) -> Iterator[list[int]]:
    if not cand and not excl:
        yield clique
        return
    # Pivot maximizing |cand & N(u)| keeps the branching minimal.
    pivot = max(cand | excl, key=lambda u: len(cand & adj[u]))
    for v in list(cand - adj[pivot]):
        yield from _expand(clique + [v], cand & adj[v], excl & adj[v], adj)
        cand.remove(v)
        excl.add(v)


def maximal_cliques(g: FeaturedGraph) -> Iterator[tuple[int, ...]]:
    """Yield every maximal clique of ``g`` as a sorted tuple.

    Bron-Kerbosch with pivoting, with the outer level run in degeneracy
    order so each maximal clique is reported once.
    """
    adj = g.adjacency()
    position = {v: i for i, v in enumerate(_degeneracy_order(adj))}
    for v in sorted(range(g.n_nodes), key=position.__getitem__):
        later = {u for u in adj[v] if position[u] > position[v]}
        earlier = {u for u in adj[v] if position[u] < position[v]}
        for clique in _expand([v], later, earlier, adj):
            yield tuple(sorted(clique))


def clique_lift(
    g: FeaturedGraph, max_rank: int, max_clique_size: int = DEFAULT_CLIQUE_CEILING
) -> SimplicialComplex:
    """Clique complex of ``g`` truncated at ``max_rank``.

    Every ``(r + 1)``-subset of every clique becomes a rank-``r`` cell, so the
    rank-1 cells are exactly the edges of ``g``.
    """
    if max_rank < 1:
        raise ComplexError(f"max_rank must be >= 1, got {max_rank}")
    per_rank: list[set[tuple[int, ...]]] = [set() for _ in range(max_rank + 1)]
    for clique in maximal_cliques(g):
        k = len(clique)
        if k > max_clique_size:
            raise CliqueSizeError(k, max_clique_size)
        for r in range(1, min(max_rank, k - 1) + 1):
            per_rank[r].update(combinations(clique, r + 1))
    arrays = [np.arange(g.n_nodes, dtype=np.int64).reshape(-1, 1)]
    for r in range(1, max_rank + 1):
        arrays.append(np.array(sorted(per_rank[r]), dtype=np.int64).reshape(-1, r + 1))
    return SimplicialComplex(arrays)


def feature_lift(X: SimplicialComplex, H0: np.ndarray) -> FeatureStore:
    """Sum-lift node features: ``H^(r) = |B_r|^T H^(r-1)`` in ascending rank."""
    H0 = np.asarray(H0)
    if H0.ndim != 2 or H0.shape[0] != X.n_nodes:
        raise ShapeError(f"expected ({X.n_nodes}, d) node features, got {H0.shape}")
    if not np.all(np.isfinite(H0)):
        raise ShapeError("node features contain non-finite values")
    feats = [H0]
    for r in range(1, X.max_rank + 1):
        feats.append(np.asarray(X.incidence(r, H0.dtype).T @ feats[-1]))
    return FeatureStore(tuple(feats))


def feature_lift_backward(X: SimplicialComplex, grads: Sequence[np.ndarray]) -> np.ndarray:
    """Pull per-rank feature gradients back onto the node features."""
    acc = np.array(grads[X.max_rank], copy=True)
    for r in range(X.max_rank, 0, -1):
        acc = np.asarray(X.incidence(r, acc.dtype) @ acc) + grads[r - 1]
    return acc


def one_skeleton(X: SimplicialComplex, node_features: np.ndarray | None = None) -> FeaturedGraph:
    return FeaturedGraph(X.n_nodes, X.edges(), node_features)
