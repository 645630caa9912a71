"""
Minibatches of subcomplexes
===========================

A seed batch plus its L-hop neighbourhood gives the same outputs for the seeds
as the full complex, as long as L covers the number of blocks.
"""
import numpy as np

from topomamba import ModelConfig, TopoMambaModel, clique_lift, generate_synthetic, per_rank_prune, sample_subcomplex

bundle = generate_synthetic(2000, 200, 2000, d_in=8, seed=1)
X = clique_lift(bundle.graph, 2)
model = TopoMambaModel.init(ModelConfig(d_in=8, d_out=2, n_blocks=2, state_size=4), seed=0, dtype=np.float64)
H = bundle.features.astype(np.float64)
full = model.forward(X, H)

seeds = np.random.default_rng(0).choice(X.n_nodes, 64, replace=False)
for hops in (1, 2):
    batch = sample_subcomplex(X, seeds, hops, features=H)
    out = model.forward(batch.sub, batch.features)[batch.seed_local]
    err = np.abs(out - full[seeds]).max()
    print(f"hops={hops}: {batch.sub.counts} cells, max deviation {err:.2e}")

a = sample_subcomplex(X, seeds, 2)
b = per_rank_prune(X, seeds, 2)
print("both samplers agree:", np.array_equal(a.nodes, b.nodes)
      and all(np.array_equal(p, q) for p, q in zip(a.sub.cells_by_rank, b.sub.cells_by_rank)))
