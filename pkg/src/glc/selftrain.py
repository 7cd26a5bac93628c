"""Desk-scale clustering/self-training loop with a linear toy extractor.

Each epoch: extract features -> DBSCAN -> (optionally) graph correction ->
train the extractor on the resulting labels. The extractor is re-initialized
once at epoch ``floor(p_r * T)``, after that epoch's labels are produced.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_softmax, softmax

from .clustering import DbscanParams, corrupt_labels, dbscan
from .config import RunConfig
from .correction import correct
from .dataset import EmbeddingSet, Labeling, RawDataset, SynthSpec, generate_synthetic
from .metrics import evaluate


def _seed(*parts) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def _glorot(rng, fan_in, fan_out):
    lim = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-lim, lim, size=(fan_in, fan_out))


@dataclass
class ToyExtractor:
    w_embed: np.ndarray  # d_raw x d
    w_cls: np.ndarray | None = None  # d x c
    b_cls: np.ndarray | None = None  # c

    @classmethod
    def init(cls, d_raw: int, d: int, seed: int = 0) -> "ToyExtractor":
        """Random semi-orthogonal embedding (orthonormal columns or rows), no classifier."""
        a = np.random.default_rng(seed).standard_normal((max(d_raw, d), min(d_raw, d)))
        q, r = np.linalg.qr(a)
        q *= np.sign(np.diag(r))
        return cls(q if d_raw >= d else q.T)

    @property
    def d(self) -> int:
        return self.w_embed.shape[1]

    @property
    def c(self) -> int:
        return 0 if self.w_cls is None else self.w_cls.shape[1]

    def with_fresh_classifier(self, c: int, seed: int) -> "ToyExtractor":
        rng = np.random.default_rng(seed)
        return ToyExtractor(self.w_embed.copy(), _glorot(rng, self.d, c), np.zeros(c))

    def copy(self) -> "ToyExtractor":
        return ToyExtractor(self.w_embed.copy(),
                            None if self.w_cls is None else self.w_cls.copy(),
                            None if self.b_cls is None else self.b_cls.copy())


def _embed(w_embed, x):
    u = x @ w_embed
    norm = np.linalg.norm(u, axis=1, keepdims=True)
    return u / norm, u, norm


def extract(ext: ToyExtractor, raw: RawDataset) -> EmbeddingSet:
    """Unit-normalized linear features plus softmax scores when a classifier exists."""
    x = np.asarray(raw.inputs, dtype=np.float64)
    if x.shape[1] != ext.w_embed.shape[0]:
        raise ValueError(f"extractor expects {ext.w_embed.shape[0]}-dim inputs, got {x.shape[1]}")
    f, _, _ = _embed(ext.w_embed, x)
    scores = None
    if ext.c:
        scores = softmax(f @ ext.w_cls + ext.b_cls, axis=1)
    return EmbeddingSet(f, raw.cameras, scores=scores, gt_labels=raw.gt_labels)


def _ce_and_grads(ext, x, y):
    f, u, norm = _embed(ext.w_embed, x)
    logits = f @ ext.w_cls + ext.b_cls
    logp = log_softmax(logits, axis=1)
    n = y.size
    loss = -logp[np.arange(n), y].mean()
    dlogits = np.exp(logp)
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    g_cls = f.T @ dlogits
    g_b = dlogits.sum(axis=0)
    df = dlogits @ ext.w_cls.T
    du = (df - f * (f * df).sum(axis=1, keepdims=True)) / norm
    g_embed = x.T @ du
    return loss, g_embed, g_cls, g_b


def extractor_loss(ext: ToyExtractor, raw: RawDataset, lab: Labeling) -> float:
    keep = lab.labels >= 0
    return float(_ce_and_grads(ext, raw.inputs[keep], lab.labels[keep])[0])


def train_extractor(ext: ToyExtractor, raw: RawDataset, lab: Labeling, steps: int, lr: float,
                    seed: int = 0) -> ToyExtractor:
    """Full-batch gradient descent on softmax cross-entropy over labeled samples.

    The classifier is rebuilt from ``seed`` whenever the cluster count changed.
    """
    keep = lab.labels >= 0
    if not keep.any():
        raise ValueError("every sample is an outlier; nothing to train on")
    if steps == 0:
        return ext.copy()
    out = ext.with_fresh_classifier(lab.n_clusters, seed) if ext.c != lab.n_clusters else ext.copy()
    x, y = raw.inputs[keep], lab.labels[keep]
    for _ in range(steps):
        _, g_embed, g_cls, g_b = _ce_and_grads(out, x, y)
        out.w_embed -= lr * g_embed
        out.w_cls -= lr * g_cls
        out.b_cls -= lr * g_b
    return out


@dataclass
class EpochRecord:
    epoch: int
    labels: Labeling
    nmi: float
    pair_f: float
    n_outliers: int
    map: float | None
    edges_removed_conf: int = 0
    edges_removed_nc: int = 0
    restarted: bool = False
    glc_applied: bool = False

    def row(self) -> dict:
        return {
            "epoch": self.epoch, "nmi": self.nmi, "pair_f": self.pair_f,
            "n_outliers": self.n_outliers, "map": self.map,
            "edges_removed_conf": self.edges_removed_conf,
            "edges_removed_nc": self.edges_removed_nc,
            "restarted": int(self.restarted), "glc_applied": int(self.glc_applied),
        }


@dataclass
class History:
    records: list = field(default_factory=list)
    extractor: ToyExtractor | None = None

    def __len__(self):
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    @property
    def final(self) -> EpochRecord:
        return self.records[-1]

    def column(self, name):
        return [getattr(r, name) for r in self.records]


def glc_epoch(t: int, cfg: RunConfig) -> bool:
    s = cfg.start_epoch
    return t >= s and (t - s) % cfg.t_c == 0


def run_loop(raw: RawDataset, cfg: RunConfig = RunConfig(), use_glc: bool = True, seed: int = 0,
             restart: bool = True) -> History:
    """Alternate clustering (plus scheduled correction) and extractor training for T epochs."""
    ext = ToyExtractor.init(raw.inputs.shape[1], cfg.embed_dim, _seed(seed, 0, 0))
    params = DbscanParams(cfg.eps, cfg.min_pts)
    gt = raw.gt_labels
    hist = History()
    for t in range(cfg.T):
        es = extract(ext, raw)
        lab = dbscan(es, params)
        rec = dict(edges_removed_conf=0, edges_removed_nc=0, glc_applied=False)
        if use_glc and glc_epoch(t, cfg) and lab.n_clusters >= 2:
            run_cfg = cfg if es.scores is not None else cfg.replace(lam=1.0)
            res = correct(es, lab, run_cfg, seed=_seed(seed, t, 1))
            lab = res.corrected
            rec.update(edges_removed_conf=res.edges_removed_conf,
                       edges_removed_nc=res.edges_removed_nc, glc_applied=True)
        restarted = restart and t == cfg.restart_epoch
        if restarted:
            ext = ToyExtractor.init(raw.inputs.shape[1], cfg.embed_dim, _seed(seed, t, 2))
        if lab.n_clusters >= 1:
            ext = train_extractor(ext, raw, lab, cfg.inner_steps, cfg.ext_lr, _seed(seed, t, 3))
        report = evaluate(lab, gt, features=extract(ext, raw) if gt is not None else None)
        hist.records.append(EpochRecord(t, lab, report.nmi, report.pair_f, report.n_outliers,
                                        report.map, restarted=restarted, **rec))
    hist.extractor = ext
    return hist


# --- seeded scenario ----------------------------------------------------------

@dataclass
class Scenario:
    raw: RawDataset
    embeddings: EmbeddingSet  # features + trained classifier scores + GT
    clean: Labeling  # DBSCAN labels on ``embeddings``
    initial: Labeling  # ``clean`` after flip / outlier corruption
    extractor: ToyExtractor


def synth_spec(cfg: RunConfig, seed: int | None = None) -> SynthSpec:
    return SynthSpec(cfg.n_identities, cfg.samples_per_identity, cfg.d_raw, cfg.n_cameras,
                     cfg.camera_shift, cfg.cluster_spread, cfg.seed if seed is None else seed)


def make_scenario(cfg: RunConfig = RunConfig(), seed: int | None = None) -> Scenario:
    """Synthetic data, one self-training round, then corrupted DBSCAN labels.

    The extractor is trained for ``inner_steps`` on DBSCAN labels of its
    initial features, so the returned embeddings carry classifier scores.
    """
    seed = cfg.seed if seed is None else seed
    raw = generate_synthetic(synth_spec(cfg, seed))
    params = DbscanParams(cfg.eps, cfg.min_pts)
    ext = ToyExtractor.init(cfg.d_raw, cfg.embed_dim, _seed(seed, 0, 0))
    warm = dbscan(extract(ext, raw), params)
    ext = train_extractor(ext, raw, warm, cfg.inner_steps, cfg.ext_lr, _seed(seed, 0, 3))
    es = extract(ext, raw)
    clean = dbscan(es, params)
    initial = corrupt_labels(clean, cfg.flip_rate, cfg.outlier_rate, _seed(seed, 0, 4))
    return Scenario(raw, es, clean, initial, ext)
