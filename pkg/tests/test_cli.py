import io

import numpy as np
import pytest

from topomamba.cli import main
from topomamba.complex import boundary_matrix, read_sparse
from topomamba.datasets import generate_synthetic, write_graph_dataset
from topomamba.lifting import clique_lift


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("data") / "toy"
    write_graph_dataset(generate_synthetic(60, 6, 40, d_in=3, seed=1), d)
    return d


def test_stats(data_dir, capsys):
    assert main(["stats", "--data", str(data_dir), "--max-rank", "3"]) == 0
    header, row = capsys.readouterr().out.strip().splitlines()
    assert header.split("\t") == ["dataset", "nodes", "edges", "triangles", "tetrahedra"]
    X = clique_lift(generate_synthetic(60, 6, 40, d_in=3, seed=1).graph, 3)
    assert row.split("\t") == ["synthetic"] + [str(c) for c in X.counts]


def test_lift_writes_cells_and_boundaries(data_dir, tmp_path, capsys):
    out = tmp_path / "lifted"
    assert main(["lift", "--input", str(data_dir), "--max-rank", "2", "--output", str(out)]) == 0
    X = clique_lift(generate_synthetic(60, 6, 40, d_in=3, seed=1).graph, 2)
    for r in range(3):
        cells = np.loadtxt(out / f"cells_rank{r}.txt", dtype=np.int64, ndmin=2)
        assert [tuple(c) for c in cells.tolist()] == X.cells(r)
    for r in (1, 2):
        rank, mat = read_sparse(io.StringIO((out / f"boundary_rank{r}.txt").read_text()))
        assert rank == r and (mat != boundary_matrix(X, r)).nnz == 0


def test_train_then_eval(data_dir, tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("max_epochs=3\npatience=3\nmax_rank=2\nd_h=8\nn_blocks=1\nstate_size=2\n")
    out = tmp_path / "run"
    args = ["train", "--data", str(data_dir), "--config", str(cfg), "--seeds", "2", "--batch-size", "16", "--out", str(out)]
    assert main(args) == 0
    text = capsys.readouterr().out
    assert "accuracy:" in text and "over 2 runs" in text
    assert (out / "results.tsv").exists() and (out / "model_seed1.ckpt").exists()

    assert main(["eval", "--checkpoint", str(out / "model_seed1.ckpt"), "--data", str(data_dir)]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert [l.split("\t")[0] for l in lines] == ["train", "val", "test"]
    test_line = (out / "results.tsv").read_text().splitlines()[3].split("\t")
    assert test_line[0] == "1"
    assert float(lines[2].split("\t")[2]) == pytest.approx(float(test_line[3]), abs=1e-4)


def test_full_batch_flag(data_dir, tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("max_epochs=2\npatience=2\nmax_rank=2\nd_h=8\nn_blocks=1\nstate_size=2\nbatch_size=8\n")
    assert main(["train", "--data", str(data_dir), "--config", str(cfg), "--full-batch"]) == 0
    assert "over 1 runs" in capsys.readouterr().out


def test_bench_batching(data_dir, capsys):
    args = ["bench-batching", "--data", str(data_dir), "--batch-sizes", "20", "--epochs", "1", "--max-rank", "2", "--d-h", "8", "--n-blocks", "1"]
    assert main(args) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[1] == "method\tbatch_size\tpeak_mib\tsec_per_epoch"
    assert [l.split("\t")[:2] for l in lines[2:]] == [["full", "full"], ["node_incidence", "20"], ["per_rank", "20"]]


def test_errors_are_reported(tmp_path, capsys):
    assert main(["stats", "--data", str(tmp_path / "missing")]) == 1
    assert "error:" in capsys.readouterr().err
    bad = tmp_path / "bad.cfg"
    bad.write_text("warp_speed=9\n")
    assert main(["train", "--data", str(tmp_path), "--config", str(bad)]) == 1
