"""Build the similarity graph for one synthetic scenario and look at it."""
import numpy as np

from glc.config import RunConfig
from glc.graph import (build_knn_graph, connected_components, edge_connectivity, joint_similarity,
                       node_connectivity)
from glc.metrics import graph_recall
from glc.selftrain import make_scenario

cfg = RunConfig()
sc = make_scenario(cfg)
es = sc.embeddings
print(f"{es.n} samples, {es.d}-dim features, {es.c} classifier outputs")

# lam=1 uses features only, lam=0.5 mixes in the classifier scores
for lam in (1.0, 0.5):
    g = build_knn_graph(joint_similarity(es, lam), cfg.k)
    print(f"lam={lam}: {g.n_edges} edges, recall of same-identity pairs {graph_recall(g, es.gt_labels):.4f}")

g = build_knn_graph(joint_similarity(es, cfg.lam), cfg.k)
deg = g.degrees()
print("degree min/median/max:", deg.min(), int(np.median(deg)), deg.max())

# node connectivity: share of common neighbours, taken from the smaller side
i, j = g.edges[0]
print(f"NC({i},{j}) = {node_connectivity(g, i, j):.3f}")
nc = edge_connectivity(g)
same = es.gt_labels[g.edges[:, 0]] == es.gt_labels[g.edges[:, 1]]
print(f"mean NC on same-identity edges {nc[same].mean():.3f}, cross-identity {nc[~same].mean():.3f}")

# k=50 on 600 points leaves one giant component
print("components of the full graph:", connected_components(g).n_clusters)
