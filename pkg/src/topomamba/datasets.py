"""Dataset directories and the synthetic triangle-membership task.

A dataset directory holds four plain-text files:

``edges.tsv``
    one undirected edge per line, two 0-based integer node ids
``features.tsv``
    ``n_0`` rows of ``d_in`` whitespace-separated reals
``labels.tsv``
    ``n_0`` values, class indices or real targets
``meta``
    ``key=value`` lines; ``task`` (classification or regression) and, for
    classification, ``num_classes``

Any edge list can be converted by writing it in the ``edges.tsv`` layout next to
matching feature and label files.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DatasetFormatError
from .lifting import FeaturedGraph, clique_lift

__all__ = ["DatasetBundle", "load_graph_dataset", "write_graph_dataset", "generate_synthetic"]


@dataclass(eq=False)
class DatasetBundle:
    graph: FeaturedGraph
    labels: np.ndarray
    task: str = "classification"
    num_classes: int | None = None
    splits: object | None = None  # optional predefined SplitMasks
    name: str = ""

    def __post_init__(self):
        self.labels = np.asarray(self.labels)
        if self.labels.shape != (self.graph.n_nodes,):
            raise DatasetFormatError(
                f"{self.labels.shape[0]} labels for {self.graph.n_nodes} nodes"
            )
        if self.task == "classification":
            if self.num_classes is None:
                self.num_classes = int(self.labels.max()) + 1 if self.labels.size else 1
            if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
                raise DatasetFormatError(f"class label outside [0, {self.num_classes})")
        elif self.task != "regression":
            raise DatasetFormatError(f"unknown task {self.task!r}")

    @property
    def n_nodes(self) -> int:
        return self.graph.n_nodes

    @property
    def features(self) -> np.ndarray:
        return self.graph.node_features

    @property
    def d_out(self) -> int:
        return self.num_classes if self.task == "classification" else 1


def _lines(path: Path):
    if not path.exists():
        raise DatasetFormatError(f"missing file {path}")
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                yield lineno, line.split()


def _read_meta(path: Path) -> dict[str, str]:
    if not path.exists():
        raise DatasetFormatError(f"missing file {path}")
    meta = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep or not key.strip():
                raise DatasetFormatError(f"{path.name}:{lineno}: expected key=value, got {line!r}")
            meta[key.strip()] = value.strip()
    return meta


def _read_features(path: Path) -> np.ndarray:
    rows = []
    width = None
    for lineno, parts in _lines(path):
        try:
            row = [float(v) for v in parts]
        except ValueError:
            raise DatasetFormatError(f"{path.name}:{lineno}: non-numeric feature value") from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise DatasetFormatError(f"{path.name}:{lineno}: {len(row)} values, expected {width}")
        rows.append(row)
    if not rows:
        raise DatasetFormatError(f"{path.name}: no feature rows")
    return np.array(rows, dtype=np.float64)


def _read_labels(path: Path, task: str) -> np.ndarray:
    out = []
    for lineno, parts in _lines(path):
        if len(parts) != 1:
            raise DatasetFormatError(f"{path.name}:{lineno}: expected one value per line")
        try:
            out.append(int(parts[0]) if task == "classification" else float(parts[0]))
        except ValueError:
            raise DatasetFormatError(f"{path.name}:{lineno}: bad label {parts[0]!r}") from None
    return np.array(out, dtype=np.int64 if task == "classification" else np.float64)


def _read_edges(path: Path, n_nodes: int) -> np.ndarray:
    edges = []
    for lineno, parts in _lines(path):
        if len(parts) != 2:
            raise DatasetFormatError(f"{path.name}:{lineno}: expected two node ids")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise DatasetFormatError(f"{path.name}:{lineno}: non-integer node id") from None
        if u == v:
            raise DatasetFormatError(f"{path.name}:{lineno}: self-loop on node {u}")
        if not (0 <= u < n_nodes and 0 <= v < n_nodes):
            raise DatasetFormatError(f"{path.name}:{lineno}: node id outside [0, {n_nodes})")
        edges.append((u, v))
    return np.array(edges, dtype=np.int64).reshape(-1, 2)


def load_graph_dataset(directory) -> DatasetBundle:
    d = Path(directory)
    meta = _read_meta(d / "meta")
    task = meta.get("task", "classification")
    if task not in ("classification", "regression"):
        raise DatasetFormatError(f"meta: unknown task {task!r}")
    num_classes = None
    if task == "classification":
        if "num_classes" not in meta:
            raise DatasetFormatError("meta: classification datasets need num_classes")
        try:
            num_classes = int(meta["num_classes"])
        except ValueError:
            raise DatasetFormatError(f"meta: bad num_classes {meta['num_classes']!r}") from None
    features = _read_features(d / "features.tsv")
    labels = _read_labels(d / "labels.tsv", task)
    n = features.shape[0]
    if labels.shape[0] != n:
        raise DatasetFormatError(f"labels.tsv has {labels.shape[0]} rows, features.tsv has {n}")
    edges = _read_edges(d / "edges.tsv", n)
    graph = FeaturedGraph(n, edges, features)
    return DatasetBundle(graph, labels, task, num_classes, name=meta.get("name", d.name))


def write_graph_dataset(bundle: DatasetBundle, directory) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "edges.tsv", "w") as fh:
        for u, v in bundle.graph.edges.tolist():
            fh.write(f"{u}\t{v}\n")
    np.savetxt(d / "features.tsv", bundle.features, fmt="%.17g", delimiter="\t")
    fmt = "%d" if bundle.task == "classification" else "%.17g"
    np.savetxt(d / "labels.tsv", bundle.labels, fmt=fmt)
    with open(d / "meta", "w") as fh:
        fh.write(f"task={bundle.task}\n")
        if bundle.task == "classification":
            fh.write(f"num_classes={bundle.num_classes}\n")
        if bundle.name:
            fh.write(f"name={bundle.name}\n")


def generate_synthetic(
    n_nodes: int,
    n_planted_triangles: int,
    noise_edges: int,
    d_in: int = 8,
    seed: int = 0,
) -> DatasetBundle:
    """Sparse random graph whose node label marks membership in a triangle.

    Triangles are planted on disjoint node triples; noise edges are added only
    when they close no new triangle, so the planted ones are the only
    triangles. Features are pure Gaussian noise, so labels can only be
    recovered from higher-order structure.
    """
    if n_nodes < 1 or d_in < 1 or n_planted_triangles < 0 or noise_edges < 0:
        raise DatasetFormatError("n_nodes and d_in must be positive, counts nonnegative")
    if 3 * n_planted_triangles > n_nodes:
        raise DatasetFormatError(
            f"cannot plant {n_planted_triangles} disjoint triangles on {n_nodes} nodes"
        )
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(3,)))
    adj: list[set[int]] = [set() for _ in range(n_nodes)]

    def add(u, v):
        adj[u].add(v)
        adj[v].add(u)

    triples = rng.permutation(n_nodes)[: 3 * n_planted_triangles].reshape(-1, 3)
    for a, b, c in triples.tolist():
        add(a, b), add(a, c), add(b, c)
    added, attempts = 0, 0
    max_attempts = 50 * noise_edges + 100
    while added < noise_edges:
        attempts += 1
        if attempts > max_attempts:
            raise DatasetFormatError(
                f"could only place {added} of {noise_edges} triangle-free noise edges"
            )
        u, v = (int(x) for x in rng.integers(0, n_nodes, size=2))
        if u == v or v in adj[u] or adj[u] & adj[v]:
            continue
        add(u, v)
        added += 1
    edges = [(u, v) for u in range(n_nodes) for v in adj[u] if u < v]
    features = rng.standard_normal((n_nodes, d_in))
    graph = FeaturedGraph(n_nodes, edges, features)
    labels = np.zeros(n_nodes, dtype=np.int64)
    triangles = clique_lift(graph, 2).cells_by_rank[2]
    labels[np.unique(triangles)] = 1
    return DatasetBundle(graph, labels, "classification", 2, name="synthetic")
