"""Simplicial complexes and their sparse boundary / incidence structure.

Cells of rank ``r`` are stored as strictly increasing vertex tuples of length
``r + 1``, kept in lexicographic order so that dense cell ids are canonical.
Orientation is the one induced by the global node order, and the boundary sign
of the face that omits the ``i``-th vertex is ``(-1) ** i``.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence, TextIO

import numpy as np
import scipy.sparse as sp

from .errors import ComplexError

__all__ = [
    "SimplicialComplex",
    "NodeIncidence",
    "build_complex",
    "boundary_matrix",
    "incidence_matrix",
    "node_incidence",
    "incident_cells",
    "write_sparse",
]

_INT64_LIMIT = 2**63 - 1


def _as_cell_array(cells: Iterable[Sequence[int]], width: int) -> np.ndarray:
    arr = np.array(sorted(cells), dtype=np.int64)
    return arr.reshape(-1, width)


def _encode_rows(rows: np.ndarray, base: int) -> np.ndarray | None:
    """Mixed-radix integer keys that preserve lexicographic row order.

    Returns ``None`` when the keys would overflow int64.
    """
    width = rows.shape[1]
    if base**width > _INT64_LIMIT:
        return None
    keys = np.zeros(rows.shape[0], dtype=np.int64)
    for k in range(width):
        keys = keys * base + rows[:, k]
    return keys


class SimplicialComplex:
    """Immutable, closure-complete simplicial complex.

    Use :func:`build_complex` to construct one from arbitrary cell lists; the
    constructor itself trusts its input to be canonical.
    """

    def __init__(self, cells_by_rank: Sequence[np.ndarray]):
        self._cells = tuple(np.ascontiguousarray(c, dtype=np.int64) for c in cells_by_rank)
        for c in self._cells:
            c.setflags(write=False)
        self._cache: dict = {}

    # -- basic shape -----------------------------------------------------
    @property
    def max_rank(self) -> int:
        return len(self._cells) - 1

    @property
    def n_nodes(self) -> int:
        return self._cells[0].shape[0]

    @property
    def cells_by_rank(self) -> tuple[np.ndarray, ...]:
        return self._cells

    @property
    def counts(self) -> tuple[int, ...]:
        """Cell counts ``n_r`` for ``r = 0..max_rank``."""
        return tuple(c.shape[0] for c in self._cells)

    def n_cells(self, r: int) -> int:
        self._check_rank(r, lo=0)
        return self._cells[r].shape[0]

    def cells(self, r: int) -> list[tuple[int, ...]]:
        self._check_rank(r, lo=0)
        return [tuple(int(v) for v in row) for row in self._cells[r]]

    def cell(self, r: int, i: int) -> tuple[int, ...]:
        self._check_rank(r, lo=0)
        return tuple(int(v) for v in self._cells[r][i])

    def cell_index(self, r: int) -> dict[tuple[int, ...], int]:
        """Map from vertex tuple to dense id for rank ``r``."""
        self._check_rank(r, lo=0)
        key = ("index", r)
        if key not in self._cache:
            self._cache[key] = {c: i for i, c in enumerate(self.cells(r))}
        return self._cache[key]

    def edges(self) -> np.ndarray:
        if self.max_rank < 1:
            return np.zeros((0, 2), dtype=np.int64)
        return self._cells[1]

    def _check_rank(self, r: int, lo: int = 1) -> None:
        if not lo <= r <= self.max_rank:
            raise ComplexError(f"rank {r} outside [{lo}, {self.max_rank}]")

    def _check_node(self, node: int) -> None:
        if not 0 <= node < self.n_nodes:
            raise ComplexError(f"node {node} outside [0, {self.n_nodes})")

    # -- derived structure ------------------------------------------------
    def face_ids(self, r: int) -> np.ndarray:
        """``(n_r, r + 1)`` array; column ``i`` is the id of the face omitting vertex ``i``."""
        self._check_rank(r)
        key = ("faces", r)
        if key in self._cache:
            return self._cache[key]
        cells = self._cells[r]
        lower = self._cells[r - 1]
        out = np.empty(cells.shape, dtype=np.int64)
        lower_keys = _encode_rows(lower, self.n_nodes) if len(lower) else None
        for i in range(r + 1):
            faces = np.delete(cells, i, axis=1)
            if lower_keys is not None:
                fkeys = _encode_rows(faces, self.n_nodes)
                pos = np.searchsorted(lower_keys, fkeys)
                pos = np.minimum(pos, len(lower_keys) - 1)
                if len(fkeys) and not np.array_equal(lower_keys[pos], fkeys):
                    raise ComplexError(f"rank-{r} cell has a face missing from rank {r - 1}")
                out[:, i] = pos
            else:
                index = self.cell_index(r - 1)
                try:
                    out[:, i] = [index[tuple(int(v) for v in f)] for f in faces]
                except KeyError as exc:
                    raise ComplexError(f"face {exc.args[0]} missing from rank {r - 1}") from None
        out.setflags(write=False)
        self._cache[key] = out
        return out

    def boundary(self, r: int) -> sp.csc_matrix:
        self._check_rank(r)
        key = ("boundary", r)
        if key not in self._cache:
            faces = self.face_ids(r)
            n_r = faces.shape[0]
            rows = faces.ravel()
            cols = np.repeat(np.arange(n_r), r + 1)
            signs = np.tile((-1) ** np.arange(r + 1), n_r).astype(np.int8)
            mat = sp.csc_matrix((signs, (rows, cols)), shape=(self.n_cells(r - 1), n_r))
            mat.sort_indices()
            self._cache[key] = mat
        return self._cache[key]

    def incidence(self, r: int, dtype=np.int8) -> sp.csc_matrix:
        """Unsigned ``|B_r|``."""
        self._check_rank(r)
        key = ("incidence", r, np.dtype(dtype).str)
        if key not in self._cache:
            mat = abs(self.boundary(r)).astype(dtype)
            self._cache[key] = mat
        return self._cache[key]

    def node_rank_incidence(self, r: int, dtype=np.int8) -> sp.csr_matrix:
        """``n_0 x n_r`` 0/1 matrix: node ``i`` is a vertex of rank-``r`` cell ``j``."""
        self._check_rank(r)
        key = ("node_rank", r, np.dtype(dtype).str)
        if key not in self._cache:
            cells = self._cells[r]
            n_r = cells.shape[0]
            rows = cells.ravel()
            cols = np.repeat(np.arange(n_r), r + 1)
            data = np.ones(rows.shape[0], dtype=dtype)
            mat = sp.csr_matrix((data, (rows, cols)), shape=(self.n_nodes, n_r))
            mat.sort_indices()
            self._cache[key] = mat
        return self._cache[key]

    # -- comparisons -------------------------------------------------------
    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SimplicialComplex):
            return NotImplemented
        return len(self._cells) == len(other._cells) and all(
            np.array_equal(a, b) for a, b in zip(self._cells, other._cells)
        )

    def __hash__(self) -> int:
        return hash(tuple(c.tobytes() for c in self._cells))

    def __repr__(self) -> str:
        return f"SimplicialComplex(counts={self.counts})"


@dataclass(frozen=True)
class NodeIncidence:
    """Nodes versus every higher-rank cell, columns ordered rank-major."""

    matrix: sp.csc_matrix
    column_rank: np.ndarray  # (n*, 2): rank, within-rank id
    offsets: tuple[int, ...]  # column offset of each rank block; offsets[r - 1] for rank r

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def rank_block(self, r: int) -> sp.csc_matrix:
        return self.matrix[:, self.offsets[r - 1] : self.offsets[r]]


def build_complex(
    cells_by_rank: Sequence[Iterable[Sequence[int]]],
    n_nodes: int,
    max_rank: int | None = None,
) -> SimplicialComplex:
    """Canonicalize, deduplicate and close a list of cells under faces.

    ``cells_by_rank[r]`` holds vertex tuples of length ``r + 1``; rank 0 may be
    left empty since all ``n_nodes`` nodes are always present. ``max_rank``
    defaults to the highest rank given.
    """
    given_rank = len(cells_by_rank) - 1
    if max_rank is None:
        max_rank = max(given_rank, 0)
    if max_rank < 0:
        raise ComplexError("max_rank must be nonnegative")
    per_rank: list[set[tuple[int, ...]]] = [set() for _ in range(max_rank + 1)]
    for r, cells in enumerate(cells_by_rank):
        for cell in cells:
            cell = tuple(int(v) for v in cell)
            if len(cell) != r + 1:
                raise ComplexError(f"cell {cell} listed at rank {r} has {len(cell)} vertices")
            if len(set(cell)) != len(cell):
                raise ComplexError(f"cell {cell} has repeated vertices")
            for v in cell:
                if not 0 <= v < n_nodes:
                    raise ComplexError(f"vertex {v} of cell {cell} outside [0, {n_nodes})")
            if r > max_rank:
                raise ComplexError(f"cell {cell} has rank {r} above max_rank {max_rank}")
            per_rank[r].add(tuple(sorted(cell)))
    for r in range(max_rank, 1, -1):
        for cell in per_rank[r]:
            per_rank[r - 1].update(combinations(cell, r))
    arrays = [np.arange(n_nodes, dtype=np.int64).reshape(-1, 1)]
    arrays += [_as_cell_array(per_rank[r], r + 1) for r in range(1, max_rank + 1)]
    return SimplicialComplex(arrays)


def boundary_matrix(X: SimplicialComplex, r: int) -> sp.csc_matrix:
    """Signed boundary ``B_r`` of shape ``(n_{r-1}, n_r)``."""
    return X.boundary(r)


def incidence_matrix(X: SimplicialComplex, r: int) -> sp.csc_matrix:
    return X.incidence(r)


def node_incidence(X: SimplicialComplex) -> NodeIncidence:
    blocks = [X.node_rank_incidence(r).tocsc() for r in range(1, X.max_rank + 1)]
    counts = [b.shape[1] for b in blocks]
    offsets = tuple(int(v) for v in np.concatenate([[0], np.cumsum(counts, dtype=np.int64)]))
    if blocks:
        mat = sp.hstack(blocks, format="csc")
    else:
        mat = sp.csc_matrix((X.n_nodes, 0), dtype=np.int8)
    column_rank = np.zeros((offsets[-1], 2), dtype=np.int64)
    for r, (lo, hi) in enumerate(zip(offsets[:-1], offsets[1:]), start=1):
        column_rank[lo:hi, 0] = r
        column_rank[lo:hi, 1] = np.arange(hi - lo)
    return NodeIncidence(mat, column_rank, offsets)


def incident_cells(X: SimplicialComplex, node: int, r: int) -> set[int]:
    """Ids of the rank-``r`` cells that contain ``node``."""
    X._check_node(node)
    X._check_rank(r)
    mat = X.node_rank_incidence(r)
    return {int(j) for j in mat.indices[mat.indptr[node] : mat.indptr[node + 1]]}


def write_sparse(mat: sp.spmatrix, rank: int, fh: TextIO) -> None:
    """Dump ``mat`` as a header line and ``row col value`` triples, column-major."""
    csc = sp.csc_matrix(mat)
    csc.sort_indices()
    csc.eliminate_zeros()
    rows, cols = csc.shape
    fh.write(f"rank {rank} rows {rows} cols {cols} nnz {csc.nnz}\n")
    for j in range(cols):
        for k in range(csc.indptr[j], csc.indptr[j + 1]):
            fh.write(f"{csc.indices[k]} {j} {int(csc.data[k])}\n")


def read_sparse(fh: TextIO) -> tuple[int, sp.csc_matrix]:
    """Inverse of :func:`write_sparse`; returns ``(rank, matrix)``."""
    header = fh.readline().split()
    if len(header) != 8 or header[0::2] != ["rank", "rows", "cols", "nnz"]:
        raise ComplexError(f"bad sparse dump header: {' '.join(header)!r}")
    rank, rows, cols, nnz = (int(v) for v in header[1::2])
    data = np.loadtxt(fh, dtype=np.int64, ndmin=2) if nnz else np.zeros((0, 3), dtype=np.int64)
    if data.shape[0] != nnz:
        raise ComplexError(f"expected {nnz} entries, found {data.shape[0]}")
    mat = sp.csc_matrix((data[:, 2], (data[:, 0], data[:, 1])), shape=(rows, cols))
    return rank, mat
