"""Initial pseudo labels: DBSCAN on cosine distance, K-means, and label corruption."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .dataset import OUTLIER, EmbeddingSet, Labeling


@dataclass(frozen=True)
class DbscanParams:
    eps: float = 0.26
    min_pts: int = 4

    def __post_init__(self):
        if not 0 < self.eps <= 2:
            raise ValueError("eps must be in (0, 2]")
        if int(self.min_pts) < 1:
            raise ValueError("min_pts must be >= 1")


def _features(x):
    return x.features if isinstance(x, EmbeddingSet) else np.asarray(x, dtype=np.float64)


def dbscan(es, params: DbscanParams = DbscanParams()) -> Labeling:
    """Classic DBSCAN with cosine distance ``1 - f_i . f_j``.

    Neighborhoods include the point itself. Points are visited in ascending
    index order, so a border point reachable from two clusters joins the one
    that is expanded first.
    """
    f = _features(es)
    n = f.shape[0]
    if n < 1:
        raise ValueError("dbscan needs at least one sample")
    dist = 1.0 - f @ f.T
    adj = dist <= params.eps
    np.fill_diagonal(adj, True)
    core = adj.sum(axis=1) >= params.min_pts
    neighbors = [np.flatnonzero(row) for row in adj]

    labels = np.full(n, OUTLIER, dtype=np.int64)
    cid = 0
    for i in range(n):
        if labels[i] != OUTLIER or not core[i]:
            continue
        labels[i] = cid
        queue = deque([i])
        while queue:
            p = queue.popleft()
            if not core[p]:
                continue
            for q in neighbors[p]:
                if labels[q] == OUTLIER:
                    labels[q] = cid
                    queue.append(q)
        cid += 1
    return Labeling(labels)


def kmeans(es, k: int, seed: int = 0, max_iter: int = 100, return_history: bool = False):
    """Lloyd's algorithm from a seeded farthest-point initialization.

    An empty cluster is re-seeded with the point farthest from its assigned
    centroid (lowest index on ties). With ``return_history`` the per-iteration
    objective values are returned as well.
    """
    x = _features(es)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ValueError("k must satisfy 1 <= k <= n")
    rng = np.random.default_rng(seed)

    centers = [int(rng.integers(n))]
    d2 = ((x - x[centers[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        nxt = int(np.argmax(d2))
        centers.append(nxt)
        d2 = np.minimum(d2, ((x - x[nxt]) ** 2).sum(axis=1))
    c = x[centers].copy()

    assign = None
    history = []
    for _ in range(max_iter):
        dist = ((x[:, None, :] - c[None, :, :]) ** 2).sum(axis=2)
        new = np.argmin(dist, axis=1)
        for empty in np.flatnonzero(np.bincount(new, minlength=k) == 0):
            own = dist[np.arange(n), new]
            own[np.bincount(new, minlength=k)[new] == 1] = -1.0  # never empty another cluster
            new[int(np.argmax(own))] = empty
        history.append(float(dist[np.arange(n), new].sum()))
        if assign is not None and np.array_equal(new, assign):
            break
        assign = new
        for j in range(k):
            c[j] = x[assign == j].mean(axis=0)
    lab = Labeling(assign)
    return (lab, history) if return_history else lab


def corrupt_labels(lab: Labeling, flip_rate: float, outlier_rate: float, seed: int = 0) -> Labeling:
    """Flip ``floor(flip_rate * L)`` labeled samples to another random cluster and
    mark ``floor(outlier_rate * N)`` other labeled samples as new outliers.

    L is the number of labeled (non-outlier) samples. The two sets are disjoint;
    outliers are drawn from the samples left unflipped.
    """
    for name, v in (("flip_rate", flip_rate), ("outlier_rate", outlier_rate)):
        if not 0 <= v <= 1:
            raise ValueError(f"{name} must be in [0, 1]")
    rng = np.random.default_rng(seed)
    y = lab.labels.copy()
    labeled = np.flatnonzero(y >= 0)
    n_flip = int(np.floor(flip_rate * labeled.size))
    k = lab.n_clusters
    if n_flip and k < 2:
        raise ValueError("cannot flip labels with fewer than 2 clusters")

    flip_idx = rng.choice(labeled, size=n_flip, replace=False) if n_flip else np.empty(0, int)
    if n_flip:
        # uniform over the k-1 other ids
        shift = rng.integers(1, k, size=n_flip)
        y[flip_idx] = (y[flip_idx] + shift) % k

    n_out = int(np.floor(outlier_rate * y.size))
    pool = np.setdiff1d(labeled, flip_idx)
    if n_out > pool.size:
        raise ValueError("flip_rate + outlier_rate leaves too few samples to mark as outliers")
    if n_out:
        y[rng.choice(pool, size=n_out, replace=False)] = OUTLIER
    return Labeling(y)
