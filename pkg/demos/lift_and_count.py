"""
Clique lifting a small graph
============================

Two triangles glued along an edge, plus a pendant node. The clique complex
keeps every node and edge and fills in each triangle.
"""
import numpy as np

from topomamba import FeaturedGraph, boundary_matrix, clique_lift, feature_lift, incident_cells

edges = [(0, 1), (1, 2), (0, 2), (1, 3), (2, 3), (3, 4)]
g = FeaturedGraph(5, np.array(edges), node_features=np.arange(5.0)[:, None])
X = clique_lift(g, max_rank=3)
print("cells per rank:", X.counts)
for r, cells in enumerate(X.cells_by_rank):
    print(f"rank {r}:", [tuple(c) for c in cells.tolist()])

# signed boundaries compose to zero
B1 = boundary_matrix(X, 1).toarray()
B2 = boundary_matrix(X, 2).toarray()
print("B1 @ B2 == 0:", not np.any(B1 @ B2))

# a cell's feature is the sum of its vertices' features
F = feature_lift(X, g.node_features)
print("triangle features:", F[2].ravel())

# which cells of each rank does node 1 belong to?
for r in range(1, X.max_rank + 1):
    print(f"node 1, rank {r}:", sorted(incident_cells(X, 1, r)))
