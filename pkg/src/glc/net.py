"""Residual GCN + symmetric edge classifier, focal loss, and full-batch SGD.

Everything is plain numpy with hand-written gradients. The forward pass is

    H_{l+1} = relu([H_l | A_hat H_l] W_l)
    z_e     = [|h_i - h_j| | h_i * h_j] . w + b,   p_e = sigmoid(z_e)
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .config import RunConfig
from .dataset import EmbeddingSet, Labeling
from .graph import KnnGraph, normalized_adjacency

P_CLAMP = 1e-7


@dataclass
class GlcModel:
    w_gcn: list  # one (2 * d_in) x d_h matrix per layer
    w_edge: np.ndarray  # length 2 * d_h
    b_edge: float = 0.0
    seed: int = 0

    @classmethod
    def init(cls, d: int, d_h: int | None = None, layers: int = 1, seed: int = 0) -> "GlcModel":
        """Glorot-uniform weights, zero bias."""
        d_h = d_h or d
        rng = np.random.default_rng(seed)
        ws = []
        d_in = d
        for _ in range(layers):
            lim = np.sqrt(6.0 / (2 * d_in + d_h))
            ws.append(rng.uniform(-lim, lim, size=(2 * d_in, d_h)))
            d_in = d_h
        lim = np.sqrt(6.0 / (2 * d_h + 1))
        return cls(ws, rng.uniform(-lim, lim, size=2 * d_h), 0.0, seed)

    @classmethod
    def zeros(cls, d: int, d_h: int | None = None, layers: int = 1) -> "GlcModel":
        d_h = d_h or d
        ws = [np.zeros((2 * d, d_h))] + [np.zeros((2 * d_h, d_h)) for _ in range(layers - 1)]
        return cls(ws, np.zeros(2 * d_h), 0.0, 0)

    @property
    def d_h(self) -> int:
        return self.w_edge.size // 2

    @property
    def n_layers(self) -> int:
        return len(self.w_gcn)

    def params(self) -> list:
        """Parameter arrays in a fixed order; the bias is a 1-element array copy."""
        return [*self.w_gcn, self.w_edge, np.array([self.b_edge])]

    def with_params(self, params) -> "GlcModel":
        *ws, w, b = params
        return GlcModel([np.array(x, dtype=np.float64) for x in ws], np.array(w, dtype=np.float64),
                        float(np.asarray(b).ravel()[0]), self.seed)

    def copy(self) -> "GlcModel":
        return copy.deepcopy(self)


@dataclass(frozen=True)
class EdgeLabelSet:
    edges: np.ndarray  # E x 2 node pairs
    y: np.ndarray  # 0/1 per edge

    @property
    def m(self) -> int:
        return int(self.y.sum())

    @property
    def n_neg(self) -> int:
        return int(self.y.size - self.y.sum())

    def __len__(self):
        return int(self.y.size)


@dataclass
class TrainReport:
    losses: list = field(default_factory=list)
    iterations: int = 0
    stop_reason: str = "early_stop_budget"
    final_loss: float = float("nan")


# --- forward ----------------------------------------------------------------

def _check_shapes(model: GlcModel, a_hat, h0):
    n, d = h0.shape
    if a_hat.shape != (n, n):
        raise ValueError(f"adjacency is {a_hat.shape}, features have {n} rows")
    if model.w_gcn[0].shape[0] != 2 * d:
        raise ValueError(f"first GCN layer expects {model.w_gcn[0].shape[0] // 2}-dim input, got {d}")


def _forward_cache(model, a_hat, h0):
    hs, cats, pres = [h0], [], []
    for w in model.w_gcn:
        h = hs[-1]
        cat = np.hstack([h, a_hat @ h])
        pre = cat @ w
        cats.append(cat)
        pres.append(pre)
        hs.append(np.maximum(pre, 0.0))
    return hs, cats, pres


def gcn_forward(model: GlcModel, a_hat, h0) -> np.ndarray:
    """Run every residual GCN layer; returns the N x d_h enhanced features."""
    h0 = np.asarray(h0, dtype=np.float64)
    _check_shapes(model, a_hat, h0)
    return _forward_cache(model, a_hat, h0)[0][-1]


def _edge_features(h, edges):
    hi, hj = h[edges[:, 0]], h[edges[:, 1]]
    diff = hi - hj
    return np.hstack([np.abs(diff), hi * hj]), hi, hj, diff


def edge_logits(model: GlcModel, h, edges) -> np.ndarray:
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    feat = _edge_features(h, edges)[0]
    return feat @ model.w_edge + model.b_edge


def edge_probs(model: GlcModel, h, edges) -> np.ndarray:
    return expit(edge_logits(model, h, edges))


def edge_confidence(model: GlcModel, h, i: int, j: int) -> float:
    if i == j:
        raise ValueError("edge confidence needs two distinct nodes")
    return float(edge_probs(model, h, np.array([[i, j]]))[0])


def make_edge_labels(g: KnnGraph, lab: Labeling) -> EdgeLabelSet:
    """1 where both endpoints share a pseudo label; edges touching outliers are dropped."""
    y = lab.labels
    if y.size != g.n:
        raise ValueError("labeling must cover every graph node")
    e = g.edges
    keep = (y[e[:, 0]] >= 0) & (y[e[:, 1]] >= 0)
    e = e[keep]
    return EdgeLabelSet(e, (y[e[:, 0]] == y[e[:, 1]]).astype(np.int64))


# --- loss -------------------------------------------------------------------

def focal_loss(preds, labels, gamma: float = 2.0) -> float:
    """Mean focal loss; gamma=0 is mean binary cross-entropy."""
    y = labels.y if isinstance(labels, EdgeLabelSet) else np.asarray(labels)
    p = np.clip(np.asarray(preds, dtype=np.float64), P_CLAMP, 1 - P_CLAMP)
    if y.size == 0:
        raise ValueError("focal loss of an empty edge set")
    if p.shape != y.shape:
        raise ValueError("predictions and labels differ in length")
    pos = y == 1
    terms = np.where(pos, -((1 - p) ** gamma) * np.log(p), -(p ** gamma) * np.log(1 - p))
    return float(terms.mean())


def _focal_grad_p(p, y, gamma):
    """d(per-edge focal loss)/dp at clamped p."""
    if gamma == 0:
        return np.where(y == 1, -1.0 / p, 1.0 / (1 - p))
    pos = gamma * (1 - p) ** (gamma - 1) * np.log(p) - (1 - p) ** gamma / p
    neg = -gamma * p ** (gamma - 1) * np.log(1 - p) + p ** gamma / (1 - p)
    return np.where(y == 1, pos, neg)


def loss_and_grads(model: GlcModel, a_hat, h0, edges, y, gamma: float = 2.0, scatter=None):
    """Focal loss over ``edges`` and its gradient w.r.t. ``model.params()``.

    ``scatter`` is an optional precomputed :class:`EdgeScatter` for ``edges``.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    y = np.asarray(y)
    if y.size == 0:
        raise ValueError("no training edges")
    hs, cats, pres = _forward_cache(model, a_hat, h0)
    h = hs[-1]
    d_h = model.d_h
    w_abs, w_prod = model.w_edge[:d_h], model.w_edge[d_h:]
    hi, hj = h[edges[:, 0]], h[edges[:, 1]]
    diff = hi - hj
    absd = np.abs(diff)
    prod = hi * hj
    z = absd @ w_abs + prod @ w_prod + model.b_edge
    p_raw = expit(z)
    p = np.clip(p_raw, P_CLAMP, 1 - P_CLAMP)
    loss = focal_loss(p, y, gamma)

    dp = _focal_grad_p(p, y, gamma) / y.size
    dp[(p_raw < P_CLAMP) | (p_raw > 1 - P_CLAMP)] = 0.0
    dz = dp * p_raw * (1 - p_raw)

    g_w = np.concatenate([absd.T @ dz, prod.T @ dz])
    g_b = dz.sum()
    if scatter is None:
        scatter = EdgeScatter(edges, h.shape[0])
    # |hi - hj| term through the signed incidence matrix, hi * hj term through
    # the dz-weighted adjacency (W h flows to i, W^T h flows to j)
    w_dz = scatter.weighted(dz)
    dh = w_abs * (scatter.incidence @ (dz[:, None] * np.sign(diff))) + w_prod * (w_dz @ h + w_dz.T @ h)
    g_layers = [None] * model.n_layers
    for layer in reversed(range(model.n_layers)):
        w = model.w_gcn[layer]
        dpre = dh * (pres[layer] > 0)
        g_layers[layer] = cats[layer].T @ dpre
        if layer:
            dcat = dpre @ w.T
            d_in = w.shape[0] // 2
            dh = dcat[:, :d_in] + a_hat.T @ dcat[:, d_in:]
    return loss, [*g_layers, g_w, np.array([g_b])]


class EdgeScatter:
    """Sparse operators that move per-edge quantities back onto nodes."""

    def __init__(self, edges, n):
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        m = len(edges)
        cols = np.arange(m)
        # signed incidence: +1 at the first endpoint, -1 at the second
        self.incidence = sp.csr_matrix(
            (np.r_[np.ones(m), -np.ones(m)], (np.r_[edges[:, 0], edges[:, 1]], np.r_[cols, cols])),
            shape=(n, m))
        self.order = np.lexsort((edges[:, 1], edges[:, 0]))
        self.indices = edges[self.order, 1]
        self.indptr = np.r_[0, np.cumsum(np.bincount(edges[:, 0], minlength=n))]
        self.n = n

    def weighted(self, values) -> sp.csr_matrix:
        """N x N matrix with ``values[e]`` at (i_e, j_e); duplicate edges add up."""
        return sp.csr_matrix((values[self.order], self.indices, self.indptr), shape=(self.n, self.n))


# --- training ---------------------------------------------------------------

def train_glc(g: KnnGraph, es: EmbeddingSet, lab: Labeling, cfg: RunConfig = RunConfig(),
              seed: int = 0, checkpoints=(), iterations: int | None = None):
    """Fresh model, then ``t_e`` full-batch SGD steps (heavy-ball momentum
    ``cfg.momentum``) on the focal loss.

    ``g`` is the training graph (outliers already masked out). ``checkpoints``
    lists iteration counts at which a copy of the model is kept; when given,
    a dict ``{iteration: model}`` is returned as a third value.
    """
    budget = cfg.t_e if iterations is None else iterations
    labels = make_edge_labels(g, lab)
    if len(labels) == 0:
        raise ValueError("no training edges (every edge touches an outlier)")
    h0 = es.features
    a_hat = normalized_adjacency(g)
    model = GlcModel.init(es.d, cfg.hidden_dim or es.d, cfg.gcn_layers, seed)
    sel = EdgeScatter(labels.edges, g.n)

    params = model.params()
    velocity = [np.zeros_like(p) for p in params]
    report = TrainReport()
    saved = {}
    want = set(int(c) for c in checkpoints)
    if 0 in want:
        saved[0] = model.copy()
    for it in range(budget):
        loss, grads = loss_and_grads(model, a_hat, h0, labels.edges, labels.y, cfg.gamma, sel)
        report.losses.append(loss)
        for p, gr, v in zip(params, grads, velocity):
            v *= cfg.momentum
            v += gr + cfg.weight_decay * p
            p -= cfg.lr * v
        model = model.with_params(params)
        params = model.params()
        if it + 1 in want:
            saved[it + 1] = model.copy()
    report.iterations = budget
    report.final_loss = loss_and_grads(model, a_hat, h0, labels.edges, labels.y, cfg.gamma, sel)[0]
    if checkpoints:
        return model, report, saved
    return model, report


def grad_check(model: GlcModel, g: KnnGraph, lab: Labeling, h0, gamma: float = 2.0,
               step: float = 1e-5, floor: float = 1e-8) -> float:
    """Largest relative gap between analytic and central-difference gradients.

    Relative error per entry is ``|a - f| / max(|a|, |f|, floor)``.
    """
    h0 = np.asarray(h0, dtype=np.float64)
    if g.n > 30:
        raise ValueError("grad_check is meant for graphs of at most 30 nodes")
    labels = make_edge_labels(g, lab)
    a_hat = normalized_adjacency(g)
    _, grads = loss_and_grads(model, a_hat, h0, labels.edges, labels.y, gamma)

    def loss_at(params):
        m = model.with_params(params)
        return loss_and_grads(m, a_hat, h0, labels.edges, labels.y, gamma)[0]

    worst = 0.0
    base = [p.copy() for p in model.params()]
    for k, p in enumerate(base):
        flat = p.ravel()
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + step
            up = loss_at(base)
            flat[idx] = orig - step
            down = loss_at(base)
            flat[idx] = orig
            fd = (up - down) / (2 * step)
            an = grads[k].ravel()[idx]
            worst = max(worst, abs(an - fd) / max(abs(an), abs(fd), floor))
    return worst


# --- model dump -------------------------------------------------------------

def save_model(model: GlcModel, path) -> None:
    """Plain text: one ``shape r c`` line per array then its row-major values."""
    with Path(path).open("w") as fh:
        fh.write(f"glc_model layers={model.n_layers} seed={model.seed}\n")
        for arr in model.params():
            a = np.atleast_2d(arr)
            fh.write(f"shape {a.shape[0]} {a.shape[1]}\n")
            for row in a:
                fh.write(" ".join(format(v, ".9g") for v in row) + "\n")


def load_model(path) -> GlcModel:
    lines = Path(path).read_text().splitlines()
    head = dict(tok.split("=") for tok in lines[0].split()[1:])
    arrays, pos = [], 1
    while pos < len(lines):
        _, r, c = lines[pos].split()
        r, c = int(r), int(c)
        rows = [[float(v) for v in lines[pos + 1 + i].split()] for i in range(r)]
        arrays.append(np.array(rows).reshape(r, c))
        pos += 1 + r
    arrays[-2] = arrays[-2].ravel()
    model = GlcModel([np.zeros(1)], np.zeros(2)).with_params(arrays)
    model.seed = int(head["seed"])
    return model
