"""Joint similarity, kNN affinity graphs, node connectivity and components."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components as _cc

from .dataset import OUTLIER, EmbeddingSet, Labeling


def joint_similarity(es: EmbeddingSet, lam: float = 0.5) -> np.ndarray:
    """``lam * F F^T + (1 - lam) * S S^T`` over the rows of F and S."""
    if not 0 <= lam <= 1:
        raise ValueError("lambda must be in [0, 1]")
    f = es.features
    sim = f @ f.T
    if lam == 1:
        return sim
    if es.scores is None:
        raise ValueError("lambda < 1 requires classification scores")
    s = es.scores
    return lam * sim + (1 - lam) * (s @ s.T)


@dataclass(frozen=True)
class KnnGraph:
    """Undirected graph as sorted unique pairs (i < j) with per-edge similarity."""

    n: int
    edges: np.ndarray
    edge_sim: np.ndarray
    k: int
    node_mask: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if e.size:
            if (e[:, 0] >= e[:, 1]).any():
                raise ValueError("edges must satisfy i < j")
            order = np.lexsort((e[:, 1], e[:, 0]))
            if not np.array_equal(order, np.arange(len(e))):
                raise ValueError("edges must be sorted lexicographically")
            if (np.diff(e[:, 0] * self.n + e[:, 1]) == 0).any():
                raise ValueError("duplicate edges")
        mask = np.asarray(self.node_mask, dtype=bool)
        if mask.shape != (self.n,):
            raise ValueError("node_mask must have length n")
        if e.size and not mask[e].all():
            raise ValueError("edge endpoint is masked out")
        for name, val in (("edges", e), ("edge_sim", np.asarray(self.edge_sim, dtype=np.float64)),
                          ("node_mask", mask)):
            val = val.copy()
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def adjacency(self) -> sp.csr_matrix:
        """Symmetric 0/1 adjacency in CSR form."""
        i, j = self.edges[:, 0], self.edges[:, 1]
        data = np.ones(2 * len(i))
        a = sp.coo_matrix((data, (np.r_[i, j], np.r_[j, i])), shape=(self.n, self.n))
        return a.tocsr()

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n)

    def subgraph(self, keep) -> "KnnGraph":
        """Same nodes, only the edges where ``keep`` is true."""
        keep = np.asarray(keep, dtype=bool)
        return KnnGraph(self.n, self.edges[keep], self.edge_sim[keep], self.k, self.node_mask)


def build_knn_graph(sim, k: int = 50, node_mask=None) -> KnnGraph:
    """Link every masked-in node to its ``k`` most similar masked-in nodes.

    Ties go to the lower index. The result is the union of all kNN lists, so an
    edge exists when either endpoint lists the other.
    """
    sim = np.asarray(sim, dtype=np.float64)
    n = sim.shape[0]
    if sim.shape != (n, n):
        raise ValueError("similarity matrix must be square")
    if k < 1:
        raise ValueError("k must be >= 1")
    mask = np.ones(n, dtype=bool) if node_mask is None else np.asarray(node_mask, dtype=bool)
    idx = np.flatnonzero(mask)
    m = idx.size
    if m < 2:
        raise ValueError("need at least 2 masked-in nodes to build a graph")
    kk = min(k, m - 1)

    sub = sim[np.ix_(idx, idx)].copy()
    np.fill_diagonal(sub, -np.inf)
    # stable sort on the negated row keeps lower indices first among ties
    nbr = np.argsort(-sub, axis=1, kind="stable")[:, :kk]
    rows = np.repeat(np.arange(m), kk)
    cols = nbr.ravel()
    a, b = np.minimum(rows, cols), np.maximum(rows, cols)
    pairs = np.unique(a * m + b)
    a, b = pairs // m, pairs % m
    edges = np.stack([idx[a], idx[b]], axis=1)
    return KnnGraph(n=n, edges=edges, edge_sim=sim[edges[:, 0], edges[:, 1]], k=kk, node_mask=mask)


def normalized_adjacency(g: KnnGraph) -> sp.csr_matrix:
    """Row-stochastic ``(D+I)^-1 (A + I)``."""
    a = g.adjacency() + sp.identity(g.n, format="csr")
    inv = 1.0 / np.asarray(a.sum(axis=1)).ravel()
    return sp.diags(inv) @ a


def node_connectivity(g: KnnGraph, i: int, j: int) -> float:
    """max(shared / deg(i), shared / deg(j)); shared neighbors exclude i and j."""
    if i == j:
        raise ValueError("node connectivity needs two distinct nodes")
    a = g.adjacency()
    ni = set(a.indices[a.indptr[i]:a.indptr[i + 1]].tolist())
    nj = set(a.indices[a.indptr[j]:a.indptr[j + 1]].tolist())
    di, dj = len(ni), len(nj)
    if di == 0 or dj == 0:
        return 0.0
    share = len((ni & nj) - {i, j})
    return max(share / di, share / dj)


def edge_connectivity(g: KnnGraph) -> np.ndarray:
    """Node connectivity of every edge of ``g``, vectorized through A @ A."""
    if g.n_edges == 0:
        return np.zeros(0)
    a = g.adjacency()
    common = a @ a
    i, j = g.edges[:, 0], g.edges[:, 1]
    share = np.asarray(common[i, j]).ravel()
    deg = g.degrees().astype(np.float64)
    return np.maximum(share / deg[i], share / deg[j])


def connected_components(g: KnnGraph) -> Labeling:
    """One label per component of masked-in nodes; masked-out nodes get -1.

    Labels are numbered by the smallest node index in each component.
    """
    _, comp = _cc(g.adjacency(), directed=False)
    comp = np.where(g.node_mask, comp, OUTLIER)
    return Labeling(comp)


def save_graph(g: KnnGraph, path, confidence=None) -> None:
    """Edge list text, one ``i j sim confidence`` line per edge (confidence nan if absent)."""
    conf = np.full(g.n_edges, np.nan) if confidence is None else np.asarray(confidence)
    with Path(path).open("w") as fh:
        fh.write(f"# n={g.n} k={g.k}\n")
        for (i, j), s, c in zip(g.edges, g.edge_sim, conf):
            fh.write(f"{i} {j} {s:.9g} {c:.9g}\n")


def load_graph(path, n=None) -> KnnGraph:
    edges, sims = [], []
    header_n, k = None, 0
    with Path(path).open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    key, _, val = tok.partition("=")
                    if key == "n":
                        header_n = int(val)
                    elif key == "k":
                        k = int(val)
                continue
            parts = line.split()
            if len(parts) < 2:
                raise ValueError(f"{path}:{lineno}: expected 'i j [sim [confidence]]'")
            i, j = int(parts[0]), int(parts[1])
            if i == j:
                raise ValueError(f"{path}:{lineno}: self-loop")
            edges.append((min(i, j), max(i, j)))
            sims.append(float(parts[2]) if len(parts) > 2 else np.nan)
    n = n if n is not None else header_n
    if n is None:
        n = max((max(e) for e in edges), default=-1) + 1
    if not edges:
        return KnnGraph(n, np.empty((0, 2), int), np.empty(0), k, np.ones(n, bool))
    e = np.array(edges, dtype=np.int64)
    key, first = np.unique(e[:, 0] * n + e[:, 1], return_index=True)
    return KnnGraph(n, e[first], np.array(sims)[first], k, np.ones(n, bool))
