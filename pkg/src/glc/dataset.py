"""Domain types, synthetic data with per-camera shift, and CSV IO."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

NORM_TOL = 1e-6
LOAD_NORM_TOL = 1e-3
OUTLIER = -1


class ParseError(ValueError):
    """Malformed input file. Carries the 1-based line number when known."""

    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


def compact_labels(labels) -> np.ndarray:
    """Map non-negative ids to 0..K-1 in order of first appearance; keep -1."""
    labels = np.asarray(labels, dtype=np.int64)
    out = np.full(labels.shape, OUTLIER, dtype=np.int64)
    mask = labels >= 0
    if mask.any():
        _, first, inverse = np.unique(labels[mask], return_index=True, return_inverse=True)
        # rank unique ids by where they first show up
        order = np.argsort(first, kind="stable")
        rank = np.empty_like(order)
        rank[order] = np.arange(order.size)
        out[mask] = rank[inverse]
    return out


@dataclass(frozen=True)
class Labeling:
    """Per-sample pseudo labels; -1 marks an outlier. Ids are compacted on construction."""

    labels: np.ndarray

    def __post_init__(self):
        raw = np.asarray(self.labels)
        if raw.ndim != 1:
            raise ValueError("labels must be one-dimensional")
        if raw.size and (raw < OUTLIER).any():
            raise ValueError("labels must be >= -1")
        object.__setattr__(self, "labels", _frozen(compact_labels(raw), np.int64))

    @property
    def n(self) -> int:
        return int(self.labels.size)

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max() + 1) if self.labels.size else 0

    @property
    def n_outliers(self) -> int:
        return int((self.labels == OUTLIER).sum())

    @property
    def outlier_mask(self) -> np.ndarray:
        return self.labels == OUTLIER

    def __len__(self):
        return self.n

    def __eq__(self, other):
        if not isinstance(other, Labeling):
            return NotImplemented
        return np.array_equal(self.labels, other.labels)

    __hash__ = None


@dataclass(frozen=True)
class EmbeddingSet:
    """N unit-length feature rows, optional score rows, camera ids, optional GT ids."""

    features: np.ndarray
    cameras: np.ndarray
    scores: np.ndarray | None = None
    gt_labels: np.ndarray | None = None

    def __post_init__(self):
        f = np.asarray(self.features, dtype=np.float64)
        if f.ndim != 2:
            raise ValueError("features must be an N x d matrix")
        norms = np.linalg.norm(f, axis=1)
        if f.shape[0] and np.abs(norms - 1.0).max() > NORM_TOL:
            raise ValueError("features: every row must have unit L2 norm")
        n = f.shape[0]
        cams = np.asarray(self.cameras)
        if cams.shape != (n,):
            raise ValueError("cameras: length must equal number of feature rows")
        object.__setattr__(self, "features", _frozen(f, np.float64))
        object.__setattr__(self, "cameras", _frozen(cams, np.int64))
        if self.scores is not None:
            s = np.asarray(self.scores, dtype=np.float64)
            if s.ndim != 2 or s.shape[0] != n:
                raise ValueError("scores: must be an N x c matrix")
            if (s < 0).any() or (s.shape[1] and np.abs(s.sum(axis=1) - 1.0).max() > NORM_TOL):
                raise ValueError("scores: rows must be non-negative and sum to 1")
            object.__setattr__(self, "scores", _frozen(s, np.float64))
        if self.gt_labels is not None:
            gt = np.asarray(self.gt_labels)
            if gt.shape != (n,):
                raise ValueError("gt_labels: length must equal number of feature rows")
            object.__setattr__(self, "gt_labels", _frozen(gt, np.int64))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def c(self) -> int:
        return 0 if self.scores is None else self.scores.shape[1]

    def __len__(self):
        return self.n


@dataclass(frozen=True)
class SynthSpec:
    n_identities: int = 30
    samples_per_identity: int = 20
    d_raw: int = 32
    n_cameras: int = 4
    camera_shift: float = 2.0
    cluster_spread: float = 0.7
    seed: int = 0

    def __post_init__(self):
        for name in ("n_identities", "samples_per_identity", "d_raw", "n_cameras"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not self.camera_shift >= 0:
            raise ValueError("camera_shift must be >= 0")
        if not self.cluster_spread > 0:
            raise ValueError("cluster_spread must be > 0")


@dataclass(frozen=True)
class RawDataset:
    inputs: np.ndarray
    cameras: np.ndarray
    gt_labels: np.ndarray
    camera_offsets: np.ndarray = field(repr=False, default=None)

    @property
    def n(self) -> int:
        return self.inputs.shape[0]


def generate_synthetic(spec: SynthSpec) -> RawDataset:
    """Gaussian identities in ``d_raw`` dims plus one additive offset per camera.

    Identity centroids are standard normal; each sample adds isotropic noise with
    std ``cluster_spread`` and the offset of its camera (norm ``camera_shift``).
    Samples are grouped by identity in ascending order.
    """
    rng = np.random.default_rng(spec.seed)
    centroids = rng.standard_normal((spec.n_identities, spec.d_raw))
    directions = rng.standard_normal((spec.n_cameras, spec.d_raw))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    offsets = spec.camera_shift * directions

    gt = np.repeat(np.arange(spec.n_identities), spec.samples_per_identity)
    n = gt.size
    cameras = rng.integers(0, spec.n_cameras, size=n)
    noise = spec.cluster_spread * rng.standard_normal((n, spec.d_raw))
    inputs = centroids[gt] + noise + offsets[cameras]
    return RawDataset(
        inputs=_frozen(inputs, np.float64),
        cameras=_frozen(cameras, np.int64),
        gt_labels=_frozen(gt, np.int64),
        camera_offsets=_frozen(offsets, np.float64),
    )


# --- IO -------------------------------------------------------------------

def _fmt(x) -> str:
    return format(float(x), ".17g")


def save_embeddings(es: EmbeddingSet, path) -> None:
    path = Path(path)
    header = ["id", "camera", "gt_label"] + [f"f_{j}" for j in range(es.d)]
    header += [f"s_{j}" for j in range(es.c)]
    gt = es.gt_labels if es.gt_labels is not None else np.full(es.n, OUTLIER)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for i in range(es.n):
                row = [str(i), str(int(es.cameras[i])), str(int(gt[i]))]
                row += [_fmt(v) for v in es.features[i]]
                if es.scores is not None:
                    row += [_fmt(v) for v in es.scores[i]]
                w.writerow(row)
    except OSError as e:
        raise OSError(f"{path}: {e.strerror or e}") from e


def _parse_header(path, header):
    if header[:3] != ["id", "camera", "gt_label"]:
        raise ParseError(path, 1, "header must start with id,camera,gt_label")
    rest = header[3:]
    d = 0
    while d < len(rest) and rest[d] == f"f_{d}":
        d += 1
    c = 0
    while d + c < len(rest) and rest[d + c] == f"s_{c}":
        c += 1
    if d == 0 or d + c != len(rest):
        raise ParseError(path, 1, "expected feature columns f_0..f_{d-1} then optional s_0..s_{c-1}")
    return d, c


def load_embeddings(path) -> EmbeddingSet:
    """Parse an embeddings CSV; rows within 1e-3 of unit norm are renormalized."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(path, 1, "empty file")
    d, c = _parse_header(path, rows[0])
    width = 3 + d + c
    feats, scores, cams, gts = [], [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != width:
            raise ParseError(path, lineno, f"expected {width} columns, got {len(row)}")
        try:
            int(row[0])
            cams.append(int(row[1]))
            gts.append(int(row[2]))
            vals = [float(v) for v in row[3:]]
        except ValueError as e:
            raise ParseError(path, lineno, f"bad number ({e})") from None
        f = np.array(vals[:d])
        norm = np.linalg.norm(f)
        if not np.isfinite(norm) or abs(norm - 1.0) > LOAD_NORM_TOL:
            raise ParseError(path, lineno, f"feature norm {norm:.6g} is not within 1e-3 of 1")
        feats.append(f / norm)
        if c:
            s = np.array(vals[d:])
            if (s < 0).any() or abs(s.sum() - 1.0) > LOAD_NORM_TOL:
                raise ParseError(path, lineno, "score row must be non-negative and sum to 1")
            scores.append(s / s.sum())
    gts = np.array(gts, dtype=np.int64)
    return EmbeddingSet(
        features=np.array(feats).reshape(len(feats), d),
        cameras=np.array(cams, dtype=np.int64),
        scores=np.array(scores).reshape(len(scores), c) if c else None,
        gt_labels=None if (gts == OUTLIER).all() and gts.size else gts,
    )


def save_labels(lab, path) -> None:
    labels = lab.labels if isinstance(lab, Labeling) else np.asarray(lab)
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            fh.write("id,label\n")
            for i, v in enumerate(labels):
                fh.write(f"{i},{int(v)}\n")
    except OSError as e:
        raise OSError(f"{path}: {e.strerror or e}") from e


def load_labels(path) -> Labeling:
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["id", "label"]:
        raise ParseError(path, 1, "header must be id,label")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 2:
            raise ParseError(path, lineno, f"expected 2 columns, got {len(row)}")
        try:
            int(row[0])
            out.append(int(row[1]))
        except ValueError as e:
            raise ParseError(path, lineno, f"bad integer ({e})") from None
        if out[-1] < OUTLIER:
            raise ParseError(path, lineno, "label must be >= -1")
    return Labeling(np.array(out, dtype=np.int64))


def save_raw(raw: RawDataset, path) -> None:
    """Raw inputs in the embeddings layout, without the unit-norm requirement."""
    path = Path(path)
    d = raw.inputs.shape[1]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "camera", "gt_label"] + [f"f_{j}" for j in range(d)])
        for i in range(raw.n):
            w.writerow([str(i), str(int(raw.cameras[i])), str(int(raw.gt_labels[i]))]
                       + [_fmt(v) for v in raw.inputs[i]])


def load_raw(path) -> RawDataset:
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(path, 1, "empty file")
    d, c = _parse_header(path, rows[0])
    if c:
        raise ParseError(path, 1, "raw files carry no score columns")
    data = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 3 + d:
            raise ParseError(path, lineno, f"expected {3 + d} columns, got {len(row)}")
        try:
            data.append([float(v) for v in row])
        except ValueError as e:
            raise ParseError(path, lineno, f"bad number ({e})") from None
    data = np.array(data).reshape(len(data), 3 + d)
    return RawDataset(
        inputs=_frozen(data[:, 3:], np.float64),
        cameras=_frozen(data[:, 1], np.int64),
        gt_labels=_frozen(data[:, 2], np.int64),
    )
