"""One correction pass on corrupted DBSCAN labels, then a threshold sweep."""
import numpy as np

from glc.config import RunConfig
from glc.correction import fit_corrector, apply_thresholds, threshold_grid
from glc.metrics import evaluate
from glc.selftrain import make_scenario

cfg = RunConfig()
sc = make_scenario(cfg)
es, gt = sc.embeddings, sc.embeddings.gt_labels

print("clean DBSCAN ", evaluate(sc.clean, gt).as_dict())
print("corrupted    ", evaluate(sc.initial, gt).as_dict())

fit = fit_corrector(es, sc.initial, cfg, seed=cfg.seed)
print(f"trained {fit.train_report.iterations} iterations, final loss {fit.train_report.losses[-1]:.4f}")

conf = fit.confidence
same = gt[fit.graph.edges[:, 0]] == gt[fit.graph.edges[:, 1]]
print("edge confidence, same identity   :", np.percentile(conf[same], [10, 50, 90]).round(3))
print("edge confidence, different people:", np.percentile(conf[~same], [10, 50, 90]).round(3))

res = apply_thresholds(fit, cfg.tau1, cfg.tau2)
print("corrected    ", evaluate(res.corrected, gt).as_dict())
print(res.summary())

# thresholds only touch inference, so the same model serves the whole grid
taus = [0.3, 0.4, 0.5, 0.6]
surface, _ = threshold_grid(es, sc.initial, cfg, taus, taus, fit=fit)
print("NMI over (tau1 rows, tau2 cols):")
print(np.round(surface, 3))
