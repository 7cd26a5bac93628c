"""Slow, obviously-correct reference implementations used only by the tests.

None of these import from ``glc``: each one is written from the textbook
definition with plain loops so it can disagree with the library.
"""
import math
from collections import deque
from itertools import combinations

import numpy as np


class UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1


def components_union_find(n, edges, mask=None):
    """Partition as a set of frozensets; masked-out nodes are left out."""
    uf = UnionFind(n)
    for i, j in edges:
        uf.union(int(i), int(j))
    groups = {}
    for v in range(n):
        if mask is not None and not mask[v]:
            continue
        groups.setdefault(uf.find(v), set()).add(v)
    return {frozenset(g) for g in groups.values()}


def as_partition(labels, keep_outliers_apart=True):
    """Labels -> set of frozensets; -1 entries become singletons (or are dropped)."""
    groups = {}
    for i, y in enumerate(labels):
        y = int(y)
        if y < 0:
            if keep_outliers_apart:
                groups[("out", i)] = {i}
            continue
        groups.setdefault(y, set()).add(i)
    return {frozenset(g) for g in groups.values()}


def dbscan_reference(x, eps, min_pts):
    """Textbook DBSCAN on cosine distance, visiting points in index order."""
    n = len(x)
    dist = [[1.0 - float(np.dot(x[i], x[j])) for j in range(n)] for i in range(n)]
    neigh = [[j for j in range(n) if dist[i][j] <= eps or i == j] for i in range(n)]
    core = [len(neigh[i]) >= min_pts for i in range(n)]
    labels = [-1] * n
    cid = 0
    for i in range(n):
        if labels[i] != -1 or not core[i]:
            continue
        labels[i] = cid
        todo = deque([i])
        while todo:
            p = todo.popleft()
            if not core[p]:
                continue
            for q in neigh[p]:
                if labels[q] == -1:
                    labels[q] = cid
                    todo.append(q)
        cid += 1
    return labels


def nmi_reference(pred, gt):
    """Arithmetic-mean NMI from explicit counts; -1 in ``pred`` is a singleton."""
    pred = list(pred)
    nxt = max(pred + [-1]) + 1
    for i, y in enumerate(pred):
        if y < 0:
            pred[i] = nxt
            nxt += 1
    n = len(pred)
    cu, cv, cuv = {}, {}, {}
    for a, b in zip(pred, gt):
        cu[a] = cu.get(a, 0) + 1
        cv[b] = cv.get(b, 0) + 1
        cuv[(a, b)] = cuv.get((a, b), 0) + 1
    hu = -sum(c / n * math.log(c / n) for c in cu.values())
    hv = -sum(c / n * math.log(c / n) for c in cv.values())
    mi = sum(c / n * math.log((c / n) / ((cu[a] / n) * (cv[b] / n))) for (a, b), c in cuv.items())
    if as_partition(pred) == as_partition(gt):
        return 1.0
    if hu == 0 or hv == 0:
        return 0.0
    return 2 * mi / (hu + hv)


def pairwise_reference(pred, gt):
    same_pred = same_gt = both = 0
    for i, j in combinations(range(len(pred)), 2):
        p = pred[i] >= 0 and pred[i] == pred[j]
        g = gt[i] == gt[j]
        same_pred += p
        same_gt += g
        both += p and g
    precision = both / same_pred if same_pred else 1.0
    recall = both / same_gt if same_gt else 1.0
    f = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f


def graph_recall_reference(edges, gt):
    edge_set = {(min(i, j), max(i, j)) for i, j in edges}
    pos = [(i, j) for i, j in combinations(range(len(gt)), 2) if gt[i] == gt[j]]
    return sum((i, j) in edge_set for i, j in pos) / len(pos)


def ap_reference(query, gallery, qid, gids):
    """AP of one query: mean of precision@rank over the ranks of relevant items."""
    sims = [float(np.dot(query, g)) for g in gallery]
    order = sorted(range(len(gallery)), key=lambda t: (-sims[t], t))
    hits, total = 0, 0.0
    for rank, t in enumerate(order, start=1):
        if gids[t] == qid:
            hits += 1
            total += hits / rank
    return total / hits if hits else 0.0


def neighbours(n, edges):
    nb = [set() for _ in range(n)]
    for i, j in edges:
        nb[int(i)].add(int(j))
        nb[int(j)].add(int(i))
    return nb


def nc_reference(n, edges, i, j):
    nb = neighbours(n, edges)
    if not nb[i] or not nb[j]:
        return 0.0
    share = len((nb[i] & nb[j]) - {i, j})
    return max(share / len(nb[i]), share / len(nb[j]))


def gcn_layer_dense(a_hat_dense, h, w):
    """relu(concat(h, a_hat @ h) @ w) written with explicit loops over nodes."""
    n = h.shape[0]
    agg = np.zeros_like(h)
    for v in range(n):
        for u in range(n):
            agg[v] += a_hat_dense[v, u] * h[u]
    out = np.zeros((n, w.shape[1]))
    for v in range(n):
        cat = np.concatenate([h[v], agg[v]])
        out[v] = np.maximum(cat @ w, 0.0)
    return out


def row_normalized_dense(n, edges):
    a = np.eye(n)
    for i, j in edges:
        a[i, j] = a[j, i] = 1.0
    return a / a.sum(axis=1, keepdims=True)


def edge_prob_scalar(hi, hj, w, b):
    d = len(hi)
    z = b
    for t in range(d):
        z += abs(hi[t] - hj[t]) * w[t] + hi[t] * hj[t] * w[d + t]
    return 1.0 / (1.0 + math.exp(-z))


def focal_scalar(preds, labels, gamma):
    total = 0.0
    for p, y in zip(preds, labels):
        p = min(max(p, 1e-7), 1 - 1e-7)
        if y:
            total += -((1 - p) ** gamma) * math.log(p)
        else:
            total += -(p ** gamma) * math.log(1 - p)
    return total / len(preds)


def bce_scalar(preds, labels):
    total = 0.0
    for p, y in zip(preds, labels):
        p = min(max(p, 1e-7), 1 - 1e-7)
        total += -(y * math.log(p) + (1 - y) * math.log(1 - p))
    return total / len(preds)


def random_graph_edges(rng, n, p):
    return [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
