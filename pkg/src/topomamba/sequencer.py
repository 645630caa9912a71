"""Per-node rank sequences.

For node ``A`` in a complex of max rank ``R`` the sequence has ``R + 1``
positions: position ``R - r`` holds the aggregate of the rank-``r`` cells that
contain ``A`` (``r = R..1``) and the last position holds ``A``'s own features.
Ranks with no incident cells aggregate to the zero vector, so every sequence
has the same length.
"""
from __future__ import annotations

import numpy as np

from .complex import SimplicialComplex
from .errors import ConfigError, ShapeError
from .lifting import FeatureStore

__all__ = [
    "AGGREGATORS",
    "LN_EPS",
    "aggregate_rank",
    "assemble_sequences",
    "assemble_sequences_backward",
    "build_sequences",
    "layer_norm",
    "layer_norm_backward",
]

AGGREGATORS = ("sum", "mean")
LN_EPS = 1e-5


def _check(X: SimplicialComplex, F: FeatureStore) -> None:
    if F.max_rank != X.max_rank:
        raise ShapeError(f"feature store has ranks 0..{F.max_rank}, complex 0..{X.max_rank}")
    for r, H in enumerate(F.features):
        if H.shape[0] != X.n_cells(r):
            raise ShapeError(f"rank {r}: {H.shape[0]} feature rows for {X.n_cells(r)} cells")


def _rank_operator(X: SimplicialComplex, r: int, dtype, aggregator: str):
    mat = X.node_rank_incidence(r, dtype)
    if aggregator == "sum":
        return mat
    if aggregator == "mean":
        counts = np.asarray(mat.sum(axis=1)).ravel()
        scale = np.where(counts > 0, 1.0 / np.maximum(counts, 1), 0.0).astype(dtype)
        return mat.multiply(scale[:, None]).tocsr()
    raise ConfigError(f"unknown aggregator {aggregator!r}; expected one of {AGGREGATORS}")


def aggregate_rank(
    X: SimplicialComplex, F: FeatureStore, node: int, r: int, aggregator: str = "sum"
) -> np.ndarray:
    """Aggregate of the rank-``r`` cell features incident to ``node``."""
    X._check_node(node)
    X._check_rank(r)
    op = _rank_operator(X, r, F[r].dtype, aggregator)
    row = op[node]
    return np.asarray(row @ F[r]).ravel()


def assemble_sequences(
    X: SimplicialComplex, F: FeatureStore, aggregator: str = "sum"
) -> np.ndarray:
    """Raw ``(n_0, R + 1, d)`` sequences before normalization."""
    _check(X, F)
    R = X.max_rank
    H0 = F[0]
    out = np.empty((X.n_nodes, R + 1, H0.shape[1]), dtype=H0.dtype)
    for r in range(1, R + 1):
        out[:, R - r, :] = _rank_operator(X, r, H0.dtype, aggregator) @ F[r]
    out[:, R, :] = H0
    return out


def assemble_sequences_backward(
    X: SimplicialComplex, grad: np.ndarray, aggregator: str = "sum"
) -> list[np.ndarray]:
    """Per-rank feature gradients given the gradient of the raw sequences."""
    R = X.max_rank
    grads = [grad[:, R, :].copy()]
    for r in range(1, R + 1):
        op = _rank_operator(X, r, grad.dtype, aggregator)
        grads.append(np.asarray(op.T @ grad[:, R - r, :]))
    return grads


def layer_norm(x, gamma=None, beta=None, eps: float = LN_EPS):
    """Normalize over the last axis; returns ``(y, cache)``."""
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    y = xhat
    if gamma is not None:
        y = y * gamma
    if beta is not None:
        y = y + beta
    return y, (xhat, inv, gamma)


def layer_norm_backward(dy, cache):
    """Returns ``(dx, dgamma, dbeta)``; the last two reduce over all leading axes."""
    xhat, inv, gamma = cache
    lead = tuple(range(dy.ndim - 1))
    dgamma = (dy * xhat).sum(axis=lead)
    dbeta = dy.sum(axis=lead)
    g = dy * gamma if gamma is not None else dy
    dx = inv * (g - g.mean(axis=-1, keepdims=True) - xhat * (g * xhat).mean(axis=-1, keepdims=True))
    return dx, dgamma, dbeta


def build_sequences(
    X: SimplicialComplex,
    F: FeatureStore,
    gamma: np.ndarray | None = None,
    beta: np.ndarray | None = None,
    aggregator: str = "sum",
    eps: float = LN_EPS,
) -> np.ndarray:
    """Assemble the rank sequences and layer-normalize every position."""
    raw = assemble_sequences(X, F, aggregator)
    return layer_norm(raw, gamma, beta, eps)[0]
