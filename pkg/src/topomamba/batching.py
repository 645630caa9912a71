"""Minibatch subcomplexes for node-level training.

Two routes build the same induced subcomplex around a set of seed nodes:

* :func:`sample_subcomplex` uses the single node incidence matrix (nodes vs all
  higher-rank cells), so sampling looks exactly like graph neighbourhood sampling;
* :func:`per_rank_prune` filters each ``|B_r|`` in turn (nodes, then edges, then
  triangles, ...), the conventional approach kept as a benchmark baseline.

Each node's rank sequence only involves cells that contain it, and all their
vertices are 1-hop neighbours, so ``hops >= n_blocks`` makes the seed-row outputs
identical to the full-complex ones.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .complex import SimplicialComplex, node_incidence
from .errors import ComplexError

__all__ = ["SubComplexBatch", "sample_subcomplex", "per_rank_prune", "iter_batches"]


@dataclass(frozen=True, eq=False)
class SubComplexBatch:
    seed_nodes: np.ndarray  # global ids, in the order given
    nodes: np.ndarray  # sorted global ids of every sampled node
    sub: SimplicialComplex
    seed_local: np.ndarray  # local ids of the seeds, aligned with seed_nodes
    features: np.ndarray | None = None
    labels: np.ndarray | None = None

    @property
    def node_map(self) -> dict[int, int]:
        return {int(g): i for i, g in enumerate(self.nodes)}

    def restrict(self, values: np.ndarray) -> np.ndarray:
        """Rows of a per-node global array, in local order."""
        return np.asarray(values)[self.nodes]


def _check_seeds(X: SimplicialComplex, seeds) -> np.ndarray:
    seeds = np.asarray(seeds, dtype=np.int64).ravel()
    if seeds.size == 0:
        raise ComplexError("seed set is empty")
    if seeds.min() < 0 or seeds.max() >= X.n_nodes:
        raise ComplexError(f"seed node outside [0, {X.n_nodes})")
    return seeds


def _relabel(X: SimplicialComplex, nodes: np.ndarray, kept: list[np.ndarray]) -> SimplicialComplex:
    """Subcomplex from per-rank kept cell ids, with nodes renumbered by their position in ``nodes``."""
    local = np.full(X.n_nodes, -1, dtype=np.int64)
    local[nodes] = np.arange(nodes.size)
    arrays = [np.arange(nodes.size, dtype=np.int64).reshape(-1, 1)]
    for r in range(1, X.max_rank + 1):
        # monotone relabelling keeps lexicographic order, so the result stays canonical
        arrays.append(local[X.cells_by_rank[r][kept[r - 1]]])
    return SimplicialComplex(arrays)


def _finish(X, seeds, nodes, kept, features, labels) -> SubComplexBatch:
    sub = _relabel(X, nodes, kept)
    seed_local = np.searchsorted(nodes, seeds)
    feats = None if features is None else np.asarray(features)[nodes]
    labs = None if labels is None else np.asarray(labels)[nodes]
    return SubComplexBatch(seeds, nodes, sub, seed_local, feats, labs)


def sample_subcomplex(
    X: SimplicialComplex,
    seed_nodes,
    hops: int,
    features=None,
    labels=None,
    fanout: int | None = None,
    rng=None,
) -> SubComplexBatch:
    """Induced subcomplex on the ``hops``-hop neighbourhood of ``seed_nodes``.

    Expansion walks the node incidence matrix: frontier nodes, the cells that
    touch them, then those cells' vertices. ``fanout`` caps the number of new
    neighbours kept per frontier node and hop (random, from ``rng``); capped
    batches are no longer exact.
    """
    seeds = _check_seeds(X, seed_nodes)
    if hops < 0:
        raise ComplexError(f"hops must be nonnegative, got {hops}")
    inc = node_incidence(X)
    B = inc.matrix.tocsr().astype(np.int32)
    Bt = B.T.tocsr()
    mask = np.zeros(X.n_nodes, dtype=bool)
    mask[seeds] = True
    frontier = mask.copy()
    if fanout is not None:
        rng = np.random.default_rng(rng)
    for _ in range(hops):
        if not frontier.any():
            break
        if fanout is None:
            touched = (Bt @ frontier.astype(np.int32)) > 0
            reach = (B @ touched.astype(np.int32)) > 0
            new = reach & ~mask
        else:
            new = np.zeros_like(mask)
            for v in np.flatnonzero(frontier):
                cells = B.indices[B.indptr[v] : B.indptr[v + 1]]
                if cells.size == 0:
                    continue
                nbrs = np.unique(np.concatenate([Bt.indices[Bt.indptr[c] : Bt.indptr[c + 1]] for c in cells]))
                nbrs = nbrs[~mask[nbrs] & ~new[nbrs]]
                if nbrs.size > fanout:
                    nbrs = rng.choice(nbrs, fanout, replace=False)
                new[nbrs] = True
        mask |= new
        frontier = new
    nodes = np.flatnonzero(mask)
    inside = Bt @ mask.astype(np.int32)  # sampled vertices per cell
    kept = []
    for r in range(1, X.max_rank + 1):
        lo, hi = inc.offsets[r - 1], inc.offsets[r]
        kept.append(np.flatnonzero(inside[lo:hi] == r + 1))
    return _finish(X, seeds, nodes, kept, features, labels)


def per_rank_prune(
    X: SimplicialComplex, seed_nodes, hops: int, features=None, labels=None
) -> SubComplexBatch:
    """Same subcomplex as :func:`sample_subcomplex`, built one incidence matrix at a time."""
    seeds = _check_seeds(X, seed_nodes)
    if hops < 0:
        raise ComplexError(f"hops must be nonnegative, got {hops}")
    mask = np.zeros(X.n_nodes, dtype=bool)
    mask[seeds] = True
    if X.max_rank >= 1:
        B1 = X.incidence(1, np.int32)
        adj = (B1 @ B1.T).tocsr()
        adj.setdiag(0)
        adj.eliminate_zeros()
        frontier = mask.copy()
        for _ in range(hops):
            new = ((adj @ frontier.astype(np.int32)) > 0) & ~mask
            mask |= new
            frontier = new
    nodes = np.flatnonzero(mask)
    kept = []
    keep_lower = mask
    sub_mats = []
    for r in range(1, X.max_rank + 1):
        Br = X.incidence(r, np.int32)
        # drop distant lower cells first, then keep the rank-r cells whose faces all survived
        rows_kept = Br[keep_lower]
        keep_r = np.asarray(rows_kept.sum(axis=0)).ravel() == r + 1
        sub_mats.append(rows_kept[:, keep_r])
        kept.append(np.flatnonzero(keep_r))
        keep_lower = keep_r
    batch = _finish(X, seeds, nodes, kept, features, labels)
    for r, mat in enumerate(sub_mats, start=1):
        if mat.shape != (batch.sub.n_cells(r - 1), batch.sub.n_cells(r)):
            raise ComplexError(f"rank {r}: pruned incidence has shape {mat.shape}")
    return batch


def iter_batches(nodes, batch_size: int, rng) -> Iterator[np.ndarray]:
    """Shuffle ``nodes`` and yield fixed-size chunks; the last one may be short."""
    nodes = np.asarray(nodes)
    if batch_size < 1:
        raise ComplexError("batch_size must be positive")
    order = np.random.default_rng(rng).permutation(nodes.size)
    for i in range(0, nodes.size, batch_size):
        yield nodes[order[i : i + batch_size]]
