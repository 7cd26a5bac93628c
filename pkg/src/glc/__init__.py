"""Graph-based pseudo-label correction for clustering-driven self-training."""

__version__ = "0.1.0"

from .clustering import DbscanParams, corrupt_labels, dbscan, kmeans
from .config import RunConfig, load_config
from .correction import CorrectionResult, correct, threshold_grid
from .dataset import EmbeddingSet, Labeling, SynthSpec, generate_synthetic
from .graph import KnnGraph, build_knn_graph, connected_components, joint_similarity
from .metrics import MetricReport, nmi, pairwise_prf
from .net import GlcModel, train_glc
from .selftrain import ToyExtractor, make_scenario, run_loop

__all__ = [
    "CorrectionResult", "DbscanParams", "EmbeddingSet", "GlcModel", "KnnGraph", "Labeling",
    "MetricReport", "RunConfig", "SynthSpec", "ToyExtractor", "build_knn_graph",
    "connected_components", "corrupt_labels", "correct", "dbscan", "generate_synthetic",
    "joint_similarity", "kmeans", "load_config", "make_scenario", "nmi", "pairwise_prf",
    "run_loop", "threshold_grid", "train_glc",
]
