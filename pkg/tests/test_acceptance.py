"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line in the summary.

Run ``pytest tests/test_acceptance.py -v``; the per-criterion lines appear in the
"acceptance criteria" section at the end. Criterion 2 needs user-supplied data,
pointed to by ``TOPOMAMBA_CORA_DIR`` and/or ``TOPOMAMBA_CITESEER_DIR`` (dataset
directories in the documented four-file layout); it is skipped otherwise.
"""
import os
import time
from contextlib import contextmanager
from itertools import product
from math import comb, factorial

import numpy as np
import pytest

from topomamba.batching import per_rank_prune, sample_subcomplex
from topomamba.cli import main as cli_main
from topomamba.complex import boundary_matrix, build_complex
from topomamba.datasets import generate_synthetic, load_graph_dataset, write_graph_dataset
from topomamba.lifting import FeaturedGraph, clique_lift, feature_lift
from topomamba.model import ModelConfig, TopoMambaModel, forward
from topomamba.ssm import GruParams, SsmLayerParams, gru_scan, gru_scan_grad, selective_scan, selective_scan_grad
from topomamba.training import TrainConfig, run_experiment

from conftest import central_difference, complete_graph, random_complex, record_criterion, rel_error
from oracles import naive_scan

# synthetic learning check: pinned sizes plus the free generator/optimizer settings
SYNTH_NODES, SYNTH_TRIANGLES = 500, 60
SYNTH_NOISE_EDGES, SYNTH_D_IN = 500, 1
SYNTH_SEEDS = 3
SYNTH_TRAIN = dict(max_rank=2, max_epochs=300, patience=300, lr=3e-3)
SYNTH_MODEL = dict(d_h=64, n_blocks=2, state_size=4)


@contextmanager
def criterion(number, title, time_limit=None):
    """Run a criterion body, time it and record PASS/FAIL; ``detail`` collects notes."""
    detail = {}
    start = time.perf_counter()
    try:
        yield detail
    except BaseException as exc:
        if isinstance(exc, pytest.skip.Exception):
            record_criterion(number, "SKIP", title, str(exc))
        else:
            record_criterion(number, "FAIL", title, _fmt(detail, time.perf_counter() - start, f"{type(exc).__name__}: {exc}"))
        raise
    elapsed = time.perf_counter() - start
    if time_limit is not None and elapsed >= time_limit:
        record_criterion(number, "FAIL", title, _fmt(detail, elapsed, f"over the {time_limit:g} s limit"))
        pytest.fail(f"criterion {number} took {elapsed:.1f} s, limit {time_limit:g} s")
    record_criterion(number, "PASS", title, _fmt(detail, elapsed))


def _fmt(detail, elapsed, extra=""):
    parts = [f"{k}={v}" for k, v in detail.items()] + [f"{elapsed:.2f} s"]
    if extra:
        parts.append(extra.splitlines()[0][:160])
    return ", ".join(parts)


def test_c1_complete_graph_counts():
    with criterion(1, "clique-lift counts of K_n are binomial", time_limit=1.0) as d:
        for n in range(3, 9):
            X = clique_lift(complete_graph(n), 3)
            assert X.counts[1:] == (comb(n, 2), comb(n, 3), comb(n, 4)), n
        d["n"] = "3..8"


TABLE1 = {"TOPOMAMBA_CORA_DIR": ("cora", (5278, 1630, 220)), "TOPOMAMBA_CITESEER_DIR": ("citeseer", (4552, 1167, 255))}


def test_c2_published_dataset_counts():
    with criterion(2, "edge/triangle/tetrahedron counts on user-supplied citation graphs", time_limit=10.0) as d:
        supplied = {k: v for k, v in TABLE1.items() if os.environ.get(k)}
        if not supplied:
            pytest.skip("no dataset supplied (set TOPOMAMBA_CORA_DIR or TOPOMAMBA_CITESEER_DIR)")
        for env, (name, expected) in supplied.items():
            bundle = load_graph_dataset(os.environ[env])
            counts = clique_lift(bundle.graph, 3).counts[1:]
            d[name] = "/".join(map(str, counts))
            assert counts == expected, name


def test_c3_algebraic_invariants():
    rng = np.random.default_rng(3)
    with criterion(3, "boundary of boundary vanishes and factorial lifting identity holds") as d:
        for _ in range(100):
            X = random_complex(rng, n_nodes=int(rng.integers(4, 31)), max_rank=int(rng.integers(1, 4)), p=0.4)
            for r in range(2, X.max_rank + 1):
                assert (boundary_matrix(X, r - 1) @ boundary_matrix(X, r)).count_nonzero() == 0
            # integer-valued features make every partial sum exact, so equality is bitwise
            Hint = rng.integers(-1000, 1000, size=(X.n_nodes, 2)).astype(np.float64)
            Fint = feature_lift(X, Hint)
            for r in range(1, X.max_rank + 1):
                cells = X.cells_by_rank[r]
                if len(cells):
                    assert np.array_equal(Fint[r], factorial(r) * Hint[cells].sum(axis=1))
        d["complexes"] = 100


def test_c4_scan_oracle():
    rng = np.random.default_rng(4)
    with criterion(4, "batched selective scan equals the naive recurrence", time_limit=5.0) as d:
        worst = 0.0
        for _ in range(200):
            L, dim, N = (int(v) for v in rng.integers(1, [17, 9, 5]))
            p = SsmLayerParams.init(dim, N, rng, np.float64)
            for v in p.arrays().values():
                v += 0.3 * rng.standard_normal(v.shape)
            batch = rng.standard_normal((3, L, dim))
            out = selective_scan(p, batch)
            for b in range(3):
                worst = max(worst, float(np.max(np.abs(out[b] - naive_scan(p, batch[b])))))
        d["max_abs_err"] = f"{worst:.1e}"
        assert worst <= 1e-12


def _fd_check(loss, analytic: dict, params: dict, errors: dict, prefix=""):
    for name, arr in params.items():
        errors[prefix + name] = rel_error(analytic[name], central_difference(loss, arr))


def test_c5_gradient_checks():
    rng = np.random.default_rng(5)
    with criterion(5, "analytic gradients match central differences", time_limit=60.0) as d:
        errors = {}
        p = SsmLayerParams.init(3, 2, rng, np.float64)
        for v in p.arrays().values():
            v += 0.3 * rng.standard_normal(v.shape)
        seq, up = rng.standard_normal((2, 4, 3)), rng.standard_normal((2, 4, 3))
        grads, dx = selective_scan_grad(p, seq, up)
        loss = lambda: float((selective_scan(p, seq) * up).sum())  # noqa: E731
        _fd_check(loss, {**grads.arrays(), "x": dx}, {**p.arrays(), "x": seq}, errors, "ssm.")

        g = GruParams.init(3, rng, np.float64)
        grads, dx = gru_scan_grad(g, seq, up)
        loss = lambda: float((gru_scan(g, seq) * up).sum())  # noqa: E731
        _fd_check(loss, {**grads.arrays(), "x": dx}, {**g.arrays(), "x": seq}, errors, "gru.")

        X = clique_lift(FeaturedGraph(6, [(0, 1), (0, 2), (1, 2), (2, 3), (3, 4), (2, 4), (4, 5)]), 2)
        H = rng.standard_normal((6, 3))
        targets = rng.integers(0, 2, size=6)
        for backbone in ("ssm", "gru"):
            m = TopoMambaModel.init(ModelConfig(3, 2, d_h=6, state_size=3, backbone=backbone, dropout=0.0), 1, np.float64)
            m.b_out[...] += 2.0  # keep the head ReLU away from its kink
            _, grads, _ = m.loss_and_grad(X, H, targets)
            loss = lambda: m.loss_and_grad(X, H, targets)[0]  # noqa: E731
            _fd_check(loss, grads, m.parameters(), errors, f"model-{backbone}.")
        worst = max(errors, key=errors.get)
        d["checked"] = len(errors)
        d["worst"] = f"{worst} {errors[worst]:.1e}"
        assert errors[worst] < 1e-4


def test_c6_batching_exactness():
    rng = np.random.default_rng(6)
    with criterion(6, "minibatch seed rows equal full-complex rows; both samplers agree", time_limit=60.0) as d:
        worst = 0.0
        for i in range(50):
            L = 1 + i % 2
            m = TopoMambaModel.init(ModelConfig(3, 3, d_h=16, n_blocks=L, state_size=4, head_activation=False), i)
            X = random_complex(rng, max_rank=int(rng.integers(1, 4)))
            H = rng.standard_normal((X.n_nodes, 3)).astype(np.float32)
            seeds = rng.choice(X.n_nodes, size=int(rng.integers(1, 6)), replace=False)
            full = forward(m, X, H)[seeds]
            batch = sample_subcomplex(X, seeds, L, H)
            local = forward(m, batch.sub, batch.features)[batch.seed_local]
            worst = max(worst, float(np.max(np.abs(local - full))))
            pruned = per_rank_prune(X, seeds, L, H)
            assert pruned.sub == batch.sub and np.array_equal(pruned.nodes, batch.nodes)
        d["max_abs_err"] = f"{worst:.1e}"
        assert worst <= 1e-6


def test_c7_permutation_equivariance():
    rng = np.random.default_rng(7)
    m = TopoMambaModel.init(ModelConfig(4, 3, d_h=16, state_size=4, head_activation=False), 7, np.float64)
    X = random_complex(rng, n_nodes=40, max_rank=3, p=0.2)
    H = rng.standard_normal((X.n_nodes, 4))
    out = forward(m, X, H)
    with criterion(7, "forward output permutes with the nodes") as d:
        worst = 0.0
        for _ in range(20):
            perm = rng.permutation(X.n_nodes)
            Y = build_complex(
                [[tuple(int(perm[v]) for v in c) for c in X.cells(r)] for r in range(X.max_rank + 1)],
                X.n_nodes,
                X.max_rank,
            )
            Hp = np.empty_like(H)
            Hp[perm] = H
            worst = max(worst, float(np.max(np.abs(forward(m, Y, Hp)[perm] - out))))
        d["max_abs_err"] = f"{worst:.1e}"
        assert worst <= 1e-12


def test_c8_synthetic_learning():
    bundle = generate_synthetic(SYNTH_NODES, SYNTH_TRIANGLES, SYNTH_NOISE_EDGES, SYNTH_D_IN, seed=0)
    config = TrainConfig(model_options=SYNTH_MODEL, **SYNTH_TRAIN)
    with criterion(8, "mean test accuracy >= 0.90 on the planted-triangle task", time_limit=120.0) as d:
        report = run_experiment(bundle, config, SYNTH_SEEDS)
        d["test"] = "/".join(f"{r.test_metric:.3f}" for r in report.runs)
        d["mean"] = f"{report.mean:.3f}"
        assert report.mean >= 0.90


def test_c9_ablation_arms(tmp_path):
    data = tmp_path / "data"
    write_graph_dataset(generate_synthetic(60, 6, 40, d_in=3, seed=9), data)
    arms = list(product([1, 2], [128, 256], [True, False], [True, False]))
    with criterion(9, "every skip x backward-scan arm on both depth and width axes writes results") as d:
        for n_blocks, d_h, skip, backward in arms:
            name = f"L{n_blocks}_d{d_h}_skip{int(skip)}_bwd{int(backward)}"
            cfg = tmp_path / f"{name}.cfg"
            cfg.write_text(
                f"n_blocks={n_blocks}\nd_h={d_h}\nuse_skip={skip}\nuse_backward_scan={backward}\n"
                "state_size=4\nmax_rank=2\nmax_epochs=2\npatience=2\n"
            )
            out = tmp_path / name
            assert cli_main(["train", "--data", str(data), "--config", str(cfg), "--out", str(out)]) == 0
            lines = (out / "results.tsv").read_text().splitlines()
            assert lines[0] == "# metric=accuracy" and lines[-2].startswith("mean")
        d["arms"] = len(arms)


def test_c10_non_reproducibility_statement(capsys):
    statement = (
        "published benchmark accuracies and per-epoch timing/memory figures are not reproduced here: "
        "they depend on unreported tuned hyperparameters and different hardware; criteria 3-8 are the "
        "substituted property-based checks"
    )
    with criterion(10, "non-reproducibility statement (non-gating smoke run)") as d:
        d["statement"] = "see README"
        cora = os.environ.get("TOPOMAMBA_CORA_DIR")
        if cora:
            bundle = load_graph_dataset(cora)
            config = TrainConfig(max_rank=3, max_epochs=200, patience=30, model_options={"d_h": 64})
            report = run_experiment(bundle, config, 1)
            plausible = report.mean > 0.70
            d["cora_smoke"] = f"{report.mean:.3f} ({'in' if plausible else 'outside'} the >0.70 band, not asserted)"
        else:
            d["cora_smoke"] = "not run"
    print(statement)
