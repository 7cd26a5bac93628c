"""Finite-difference check of the hand-written backward pass."""
import numpy as np

from glc.dataset import Labeling
from glc.graph import build_knn_graph
from glc.net import GlcModel, grad_check

rng = np.random.default_rng(0)
x = rng.standard_normal((20, 8))
x /= np.linalg.norm(x, axis=1, keepdims=True)
g = build_knn_graph(x @ x.T, 5)
lab = Labeling(rng.integers(0, 4, 20))

for layers in (1, 2, 3):
    for gamma in (0.0, 2.0):
        err = grad_check(GlcModel.init(8, 8, layers, seed=layers), g, lab, x, gamma)
        print(f"layers={layers} gamma={gamma}: max relative error {err:.2e}")
