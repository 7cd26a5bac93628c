"""Partition metrics (NMI, pairwise P/R/F), kNN-graph recall and retrieval mAP.

Outliers (-1) in a predicted labeling always count as singleton clusters.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .dataset import EmbeddingSet, Labeling
from .graph import KnnGraph


def _as_array(lab):
    return lab.labels if isinstance(lab, Labeling) else np.asarray(lab, dtype=np.int64)


def expand_outliers(labels) -> np.ndarray:
    """Give every -1 its own fresh id."""
    y = _as_array(labels).copy()
    out = y < 0
    if out.any():
        y[out] = y.max(initial=-1) + 1 + np.arange(out.sum())
    return y


def _contingency(a, b):
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    return table


def _same_partition(a, b):
    t = _contingency(a, b)
    return ((t > 0).sum(axis=0) == 1).all() and ((t > 0).sum(axis=1) == 1).all()


def _entropy(counts, n):
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def nmi(pred, gt) -> float:
    """2 I(U;V) / (H(U) + H(V)), natural log."""
    u, v = expand_outliers(pred), _as_array(gt)
    if u.shape != v.shape:
        raise ValueError("labelings differ in length")
    if (v < 0).any():
        raise ValueError("ground truth may not contain -1")
    if u.size == 0 or _same_partition(u, v):
        return 1.0
    t = _contingency(u, v)
    n = u.size
    hu, hv = _entropy(t.sum(axis=1), n), _entropy(t.sum(axis=0), n)
    if hu == 0 or hv == 0:
        return 0.0
    nz = t > 0
    pij = t[nz] / n
    outer = np.outer(t.sum(axis=1), t.sum(axis=0))[nz] / n**2
    mi = float((pij * np.log(pij / outer)).sum())
    return max(0.0, min(1.0, 2 * mi / (hu + hv)))


def _pairs(counts):
    counts = np.asarray(counts, dtype=np.int64)
    return int((counts * (counts - 1) // 2).sum())


def pairwise_prf(pred, gt):
    """Pair-counting precision, recall and F over all unordered sample pairs.

    Empty denominators count as perfect (1.0).
    """
    u, v = expand_outliers(pred), _as_array(gt)
    if u.shape != v.shape:
        raise ValueError("labelings differ in length")
    t = _contingency(u, v) if u.size else np.zeros((0, 0), int)
    both = _pairs(t.ravel())
    same_pred = _pairs(t.sum(axis=1))
    same_gt = _pairs(t.sum(axis=0))
    precision = both / same_pred if same_pred else 1.0
    recall = both / same_gt if same_gt else 1.0
    f = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f


def graph_recall(g: KnnGraph, gt) -> float:
    """Fraction of same-identity pairs joined by an edge of ``g``."""
    v = _as_array(gt)
    if v.size != g.n:
        raise ValueError("ground truth must cover every node")
    total = _pairs(np.unique(v, return_counts=True)[1])
    if total == 0:
        raise ValueError("ground truth has no same-identity pairs")
    if g.n_edges == 0:
        return 0.0
    hit = int((v[g.edges[:, 0]] == v[g.edges[:, 1]]).sum())
    return hit / total


def average_precision(relevant_sorted) -> float:
    rel = np.asarray(relevant_sorted, dtype=bool)
    if not rel.any():
        return 0.0
    hits = np.cumsum(rel)
    ranks = np.flatnonzero(rel) + 1
    return float((hits[rel] / ranks).mean())


def retrieval_map(query, gallery, query_ids=None, gallery_ids=None) -> float:
    """Mean AP of cosine-similarity rankings of ``gallery`` for each query.

    ``query`` and ``gallery`` are EmbeddingSets carrying ``gt_labels`` or raw
    unit-row matrices with ids passed separately. Ties rank by gallery index.
    """
    qf, qid = _unpack(query, query_ids)
    gf, gid = _unpack(gallery, gallery_ids)
    present = set(gid.tolist())
    for qi, ident in enumerate(qid):
        if int(ident) not in present:
            raise ValueError(f"query {qi}: identity {int(ident)} is absent from the gallery")
    sims = qf @ gf.T
    aps = []
    for qi in range(len(qid)):
        order = np.argsort(-sims[qi], kind="stable")
        aps.append(average_precision(gid[order] == qid[qi]))
    return float(np.mean(aps))


def _unpack(x, ids):
    if isinstance(x, EmbeddingSet):
        return x.features, (x.gt_labels if ids is None else np.asarray(ids))
    if ids is None:
        raise ValueError("identity ids are required for raw feature matrices")
    return np.asarray(x, dtype=np.float64), np.asarray(ids)


def query_gallery_split(gt):
    """First sample of each identity is a query; the rest form the gallery."""
    gt = np.asarray(gt)
    ids, first, counts = np.unique(gt, return_index=True, return_counts=True)
    q = np.sort(first[counts > 1])
    g = np.setdiff1d(np.arange(gt.size), q)
    return q, g


@dataclass(frozen=True)
class MetricReport:
    nmi: float
    pair_precision: float
    pair_recall: float
    pair_f: float
    n_outliers: int
    graph_recall: float | None = None
    map: float | None = None

    def as_dict(self) -> dict:
        return asdict(self)


def evaluate(pred, gt, graph: KnnGraph | None = None, features=None) -> MetricReport:
    y = _as_array(pred)
    p, r, f = pairwise_prf(y, gt)
    m = None
    if features is not None:
        gt_arr = _as_array(gt)
        q, g = query_gallery_split(gt_arr)
        feats = features.features if isinstance(features, EmbeddingSet) else np.asarray(features)
        m = retrieval_map(feats[q], feats[g], gt_arr[q], gt_arr[g])
    return MetricReport(
        nmi=nmi(y, gt),
        pair_precision=p,
        pair_recall=r,
        pair_f=f,
        n_outliers=int((y < 0).sum()),
        graph_recall=None if graph is None else graph_recall(graph, gt),
        map=m,
    )
