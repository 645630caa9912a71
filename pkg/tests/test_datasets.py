import numpy as np
import pytest

from topomamba.datasets import DatasetBundle, generate_synthetic, load_graph_dataset, write_graph_dataset
from topomamba.errors import DatasetFormatError
from topomamba.lifting import FeaturedGraph, clique_lift


def write_dir(path, edges="0\t1\n1\t2\n", features="1 2\n3 4\n5 6\n", labels="0\n1\n0\n", meta="task=classification\nnum_classes=2\n"):
    path.mkdir(exist_ok=True)
    (path / "edges.tsv").write_text(edges)
    (path / "features.tsv").write_text(features)
    (path / "labels.tsv").write_text(labels)
    (path / "meta").write_text(meta)
    return path


def test_load_minimal(tmp_path):
    b = load_graph_dataset(write_dir(tmp_path / "d", edges="1 0\n0 1\n2 1\n"))
    assert b.n_nodes == 3 and b.num_classes == 2 and b.task == "classification"
    assert b.graph.edges.tolist() == [[0, 1], [1, 2]]
    assert b.features.tolist() == [[1, 2], [3, 4], [5, 6]]
    assert b.name == "d"


def test_self_loop_names_line(tmp_path):
    d = write_dir(tmp_path / "d", edges="0 1\n\n4 4\n", features="0\n" * 5, labels="0\n" * 5)
    with pytest.raises(DatasetFormatError, match=r"edges.tsv:3"):
        load_graph_dataset(d)


@pytest.mark.parametrize(
    "kwargs, pattern",
    [
        (dict(labels="0\n1\n"), "labels.tsv has 2 rows"),
        (dict(features="1 2\n3\n5 6\n"), "features.tsv:2"),
        (dict(features="1 x\n3 4\n5 6\n"), "features.tsv:1"),
        (dict(edges="0 7\n"), "edges.tsv:1"),
        (dict(edges="0 1 2\n"), "edges.tsv:1"),
        (dict(labels="0\n1\n5\n"), "class label"),
        (dict(labels="0\n1\nb\n"), "labels.tsv:3"),
        (dict(meta="task=classification\n"), "num_classes"),
        (dict(meta="task=ranking\n"), "unknown task"),
        (dict(meta="garbage\n"), "meta:1"),
    ],
)
def test_format_errors(tmp_path, kwargs, pattern):
    with pytest.raises(DatasetFormatError, match=pattern):
        load_graph_dataset(write_dir(tmp_path / "d", **kwargs))


def test_missing_file(tmp_path):
    d = write_dir(tmp_path / "d")
    (d / "labels.tsv").unlink()
    with pytest.raises(DatasetFormatError, match="missing"):
        load_graph_dataset(d)


def test_regression_dataset(tmp_path):
    b = load_graph_dataset(write_dir(tmp_path / "d", labels="0.5\n-1\n2e3\n", meta="task=regression\n"))
    assert b.task == "regression" and b.d_out == 1
    assert b.labels.tolist() == [0.5, -1.0, 2000.0]


def test_round_trip(tmp_path, rng):
    b = generate_synthetic(40, 5, 20, d_in=3, seed=2)
    write_graph_dataset(b, tmp_path / "s")
    c = load_graph_dataset(tmp_path / "s")
    assert np.array_equal(c.graph.edges, b.graph.edges)
    assert np.array_equal(c.features, b.features)
    assert np.array_equal(c.labels, b.labels)
    assert (c.task, c.num_classes, c.name) == (b.task, b.num_classes, b.name)

    r = DatasetBundle(FeaturedGraph(3, [(0, 2)], rng.standard_normal((3, 2))), rng.standard_normal(3), "regression")
    write_graph_dataset(r, tmp_path / "r")
    r2 = load_graph_dataset(tmp_path / "r")
    assert np.array_equal(r2.labels, r.labels) and np.array_equal(r2.features, r.features)


def test_bundle_validation():
    g = FeaturedGraph(3, [(0, 1)], np.zeros((3, 1)))
    with pytest.raises(DatasetFormatError):
        DatasetBundle(g, [0, 1])
    with pytest.raises(DatasetFormatError):
        DatasetBundle(g, [0, 1, 2], num_classes=2)
    with pytest.raises(DatasetFormatError):
        DatasetBundle(g, [0, 1, 0], task="ranking")
    assert DatasetBundle(g, [0, 2, 1]).num_classes == 3


def test_synthetic_labels_are_triangle_membership():
    for seed in range(5):
        b = generate_synthetic(120, 12, 100, d_in=4, seed=seed)
        X = clique_lift(b.graph, 2)
        members = set(np.unique(X.cells_by_rank[2]).tolist())
        assert X.n_cells(2) >= 12
        assert b.labels.tolist() == [int(v in members) for v in range(120)]
        assert b.features.shape == (120, 4)


def test_synthetic_noise_only_is_all_zero():
    b = generate_synthetic(50, 0, 60, seed=3)
    assert clique_lift(b.graph, 2).n_cells(2) == 0
    assert not b.labels.any()
    assert b.graph.n_edges == 60


def test_synthetic_is_deterministic():
    a, b = generate_synthetic(80, 8, 50, seed=4), generate_synthetic(80, 8, 50, seed=4)
    assert np.array_equal(a.graph.edges, b.graph.edges)
    assert np.array_equal(a.features, b.features) and np.array_equal(a.labels, b.labels)
    c = generate_synthetic(80, 8, 50, seed=5)
    assert not np.array_equal(a.graph.edges, c.graph.edges)


@pytest.mark.parametrize("args", [(10, 4, 0), (10, 1, 100), (0, 0, 0), (10, -1, 0)])
def test_synthetic_infeasible(args):
    with pytest.raises(DatasetFormatError):
        generate_synthetic(*args)
