"""One full label-correction pass and the (tau1, tau2) threshold study.

The pass: joint-similarity kNN graph, train on the outlier-free graph, score
every edge of the full graph, drop edges below ``tau1`` confidence, then drop
edges below ``tau2`` node connectivity on what is left, and relabel by
connected components.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .dataset import OUTLIER, EmbeddingSet, Labeling
from .graph import (KnnGraph, build_knn_graph, connected_components, edge_connectivity,
                    joint_similarity, normalized_adjacency)
from .metrics import nmi
from .net import GlcModel, TrainReport, edge_probs, gcn_forward, train_glc


@dataclass
class FittedCorrector:
    """A trained model together with its edge scores on the inference graph."""

    model: GlcModel
    train_report: TrainReport
    graph: KnnGraph  # over all nodes, outliers included
    confidence: np.ndarray  # per edge of ``graph``
    input_labels: Labeling


@dataclass
class CorrectionResult:
    corrected: Labeling
    edges_removed_conf: int
    edges_removed_nc: int
    n_outliers_before: int
    n_outliers_after: int
    train_report: TrainReport
    kept: np.ndarray  # bool per inference-graph edge

    def summary(self) -> dict:
        return {
            "n_clusters": self.corrected.n_clusters,
            "edges_removed_conf": self.edges_removed_conf,
            "edges_removed_nc": self.edges_removed_nc,
            "n_outliers_before": self.n_outliers_before,
            "n_outliers_after": self.n_outliers_after,
            "train_iterations": self.train_report.iterations,
            "train_loss_first": self.train_report.losses[0] if self.train_report.losses else None,
            "train_loss_final": self.train_report.final_loss,
        }


def _check_input(es: EmbeddingSet, lab: Labeling, cfg: RunConfig):
    if lab.n != es.n:
        raise ValueError("labeling and embeddings differ in length")
    if lab.n_clusters < 2:
        raise ValueError("correction needs at least 2 clusters among non-outliers")
    if cfg.lam < 1 and es.scores is None:
        raise ValueError("lambda < 1 requires classification scores")


def build_graphs(es: EmbeddingSet, lab: Labeling, cfg: RunConfig):
    """(training graph without outliers, inference graph over all nodes)."""
    sim = joint_similarity(es, cfg.lam)
    train_g = build_knn_graph(sim, cfg.k, node_mask=~lab.outlier_mask)
    infer_g = build_knn_graph(sim, cfg.k)
    return train_g, infer_g


def fit_corrector(es: EmbeddingSet, lab: Labeling, cfg: RunConfig = RunConfig(), seed: int = 0,
                  model: GlcModel | None = None) -> FittedCorrector:
    """Train a fresh model (or reuse ``model``) and score the inference graph."""
    _check_input(es, lab, cfg)
    train_g, infer_g = build_graphs(es, lab, cfg)
    if model is None:
        model, report = train_glc(train_g, es, lab, cfg, seed)
    else:
        report = TrainReport(iterations=0)
    h = gcn_forward(model, normalized_adjacency(infer_g), es.features)
    conf = edge_probs(model, h, infer_g.edges)
    return FittedCorrector(model, report, infer_g, conf, lab)


def apply_thresholds(fit: FittedCorrector, tau1: float, tau2: float) -> CorrectionResult:
    g = fit.graph
    keep_conf = fit.confidence >= tau1
    pruned = g.subgraph(keep_conf)
    nc = edge_connectivity(pruned)
    keep_nc = nc >= tau2
    kept = keep_conf.copy()
    kept[np.flatnonzero(keep_conf)[~keep_nc]] = False

    comp = connected_components(g.subgraph(kept)).labels.copy()
    sizes = np.bincount(comp, minlength=comp.max() + 1)
    was_outlier = fit.input_labels.outlier_mask
    comp[(sizes[comp] == 1) & was_outlier] = OUTLIER
    corrected = Labeling(comp)
    return CorrectionResult(
        corrected=corrected,
        edges_removed_conf=int((~keep_conf).sum()),
        edges_removed_nc=int((~keep_nc).sum()),
        n_outliers_before=fit.input_labels.n_outliers,
        n_outliers_after=corrected.n_outliers,
        train_report=fit.train_report,
        kept=kept,
    )


def correct(es: EmbeddingSet, lab: Labeling, cfg: RunConfig = RunConfig(), seed: int = 0) -> CorrectionResult:
    """Correct noisy pseudo labels and re-label outliers."""
    return apply_thresholds(fit_corrector(es, lab, cfg, seed), cfg.tau1, cfg.tau2)


def threshold_grid(es: EmbeddingSet, lab: Labeling, cfg: RunConfig, tau1s, tau2s, seed: int = 0,
                   fit: FittedCorrector | None = None):
    """NMI of the corrected labels for every (tau1, tau2); one model for the whole grid.

    Returns ``(nmi_matrix, results)`` where ``results[a][b]`` is the
    CorrectionResult for ``(tau1s[a], tau2s[b])``.
    """
    if es.gt_labels is None:
        raise ValueError("threshold grid needs ground-truth identities")
    for t in (*tau1s, *tau2s):
        if not 0 <= t <= 1:
            raise ValueError(f"threshold {t} outside [0, 1]")
    fit = fit or fit_corrector(es, lab, cfg, seed)
    surface = np.zeros((len(tau1s), len(tau2s)))
    results = []
    for a, t1 in enumerate(tau1s):
        row = []
        for b, t2 in enumerate(tau2s):
            res = apply_thresholds(fit, t1, t2)
            surface[a, b] = nmi(res.corrected, es.gt_labels)
            row.append(res)
        results.append(row)
    return surface, results
