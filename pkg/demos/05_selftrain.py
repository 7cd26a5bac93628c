"""Short self-training run with and without correction, same data and seed.

Smaller than the default scenario so it finishes in well under a minute.
"""
from glc.config import RunConfig
from glc.dataset import generate_synthetic
from glc.selftrain import run_loop, synth_spec

cfg = RunConfig(n_identities=15, samples_per_identity=16, T=10, k=30, t_e=120)
raw = generate_synthetic(synth_spec(cfg, seed=1))

for use_glc in (False, True):
    hist = run_loop(raw, cfg, use_glc=use_glc, seed=1)
    print("glc" if use_glc else "baseline")
    for rec in hist.records:
        flag = "*" if rec.glc_applied else " "
        print(f"  epoch {rec.epoch:2d}{flag} NMI {rec.nmi:.3f}  outliers {rec.n_outliers:3d}  mAP {rec.map:.3f}")
