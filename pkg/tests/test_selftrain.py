import numpy as np
import pytest

from glc.config import RunConfig
from glc.dataset import Labeling, SynthSpec, generate_synthetic
from glc.selftrain import (ToyExtractor, extract, extractor_loss, glc_epoch, make_scenario,
                           run_loop, train_extractor)

SMALL = RunConfig(n_identities=6, samples_per_identity=8, d_raw=8, embed_dim=8, T=6,
                  inner_steps=30, t_e=20, k=10, p_s=0.34, t_c=2, p_r=0.5)


@pytest.fixture(scope="module")
def raw():
    return generate_synthetic(SynthSpec(n_identities=6, samples_per_identity=8, d_raw=8, seed=1))


def test_extract_unit_features_and_uniform_scores(raw):
    ext = ToyExtractor.init(8, 8, seed=0)
    es = extract(ext, raw)
    assert np.allclose(np.linalg.norm(es.features, axis=1), 1)
    assert es.scores is None
    zero = ToyExtractor(ext.w_embed, np.zeros((8, 3)), np.zeros(3))
    assert np.allclose(extract(zero, raw).scores, 1 / 3)


def test_orthonormal_init(raw):
    w = ToyExtractor.init(8, 5, seed=1).w_embed
    assert np.allclose(w.T @ w, np.eye(5))


def test_score_rows_sum_to_one(raw):
    ext = ToyExtractor.init(8, 8, 0).with_fresh_classifier(4, seed=2)
    assert np.abs(extract(ext, raw).scores.sum(axis=1) - 1).max() < 1e-9


def test_extract_shape_error(raw):
    with pytest.raises(ValueError):
        extract(ToyExtractor.init(5, 4), raw)


def test_train_extractor(raw):
    ext = ToyExtractor.init(8, 8, 0)
    lab = Labeling(raw.gt_labels % 2)
    same = train_extractor(ext, raw, lab, 0, 1.0)
    assert np.array_equal(same.w_embed, ext.w_embed)
    a = train_extractor(ext, raw, lab, 200, 1.0, seed=4)
    b = train_extractor(ext, raw, lab, 200, 1.0, seed=4)
    assert np.array_equal(a.w_embed, b.w_embed) and np.array_equal(a.w_cls, b.w_cls)
    start = ext.with_fresh_classifier(2, seed=4)
    assert extractor_loss(a, raw, lab) < extractor_loss(start, raw, lab)
    with pytest.raises(ValueError):
        train_extractor(ext, raw, Labeling(np.full(raw.n, -1)), 5, 1.0)


def test_outliers_do_not_affect_training(raw):
    ext = ToyExtractor.init(8, 8, 0)
    y = raw.gt_labels % 3
    y[:5] = -1
    lab1 = Labeling(y)
    # moving the outliers' inputs must not change training
    x = raw.inputs.copy()
    x[:5] += 50.0
    moved = type(raw)(x, raw.cameras, raw.gt_labels, raw.camera_offsets)
    a = train_extractor(ext, raw, lab1, 20, 1.0, seed=1)
    b = train_extractor(ext, moved, lab1, 20, 1.0, seed=1)
    assert np.allclose(a.w_embed, b.w_embed) and np.allclose(a.w_cls, b.w_cls)


def test_glc_schedule():
    cfg = RunConfig(T=30)
    assert [t for t in range(30) if glc_epoch(t, cfg)] == list(range(6, 30, 2))


def test_loop_baseline_deterministic(raw):
    a = run_loop(raw, SMALL, use_glc=False, seed=2, restart=False)
    b = run_loop(raw, SMALL, use_glc=False, seed=2, restart=False)
    assert [r.labels.labels.tolist() for r in a] == [r.labels.labels.tolist() for r in b]
    assert not any(a.column("glc_applied"))


def test_loop_records(raw):
    h = run_loop(raw, SMALL, use_glc=True, seed=2)
    assert len(h) == SMALL.T
    for t, rec in enumerate(h):
        # a scheduled epoch is skipped only when clustering left fewer than 2 clusters
        assert not rec.glc_applied or glc_epoch(t, SMALL)
    assert any(h.column("glc_applied"))
    assert h.column("restarted") == [t == SMALL.restart_epoch for t in range(SMALL.T)]
    assert all(0 <= v <= 1 for v in h.column("nmi"))
    assert all(r.map is not None for r in h)


def test_restart_keeps_labels(raw):
    a = run_loop(raw, SMALL, use_glc=True, seed=2, restart=True)
    b = run_loop(raw, SMALL, use_glc=True, seed=2, restart=False)
    t = SMALL.restart_epoch
    assert np.array_equal(a[t].labels.labels, b[t].labels.labels)


def test_no_restart_at_boundary(raw):
    h = run_loop(raw, SMALL.replace(p_r=1.0), use_glc=False, seed=0)
    assert not any(h.column("restarted"))


def test_scenario_deterministic():
    a, b = make_scenario(RunConfig(), seed=5), make_scenario(RunConfig(), seed=5)
    assert np.array_equal(a.initial.labels, b.initial.labels)
    assert np.array_equal(a.embeddings.features, b.embeddings.features)
    assert a.embeddings.scores is not None
