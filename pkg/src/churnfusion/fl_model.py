"""Semi-supervised financial-literacy regression.

A rare-target oversampler (interpolation between rare neighbors, Gaussian
perturbation for isolated rare cases) feeds two diverse k-NN regressors
that co-train on an unlabeled pool: each learner offers the pseudo-labeled
point that most reduces its peer's leave-one-out squared error. The final
score is the clipped mean of both learners, in [0, 1].
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EmptyLabeledSet, TargetOutOfRange, TooFewExamples

MAGIC = b"FLKN"
VERSION = 1


@dataclass(frozen=True)
class SmognConfig:
    relevance_threshold: float = 0.8
    k_neighbors: int = 5
    gaussian_perturbation: float = 0.05
    oversample_ratio: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.relevance_threshold < 1.0:
            raise ValueError("relevance_threshold must lie in (0, 1)")
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")
        if self.gaussian_perturbation < 0:
            raise ValueError("gaussian_perturbation must be non-negative")
        if self.oversample_ratio <= 0:
            raise ValueError("oversample_ratio must be positive")


@dataclass(frozen=True)
class CoregConfig:
    k1: int = 3
    k2: int = 3
    p1: float = 2.0
    p2: float = 5.0
    max_iterations: int = 15
    pool_size: int = 50
    batch_per_iter: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.k1 < 1 or self.k2 < 1:
            raise ValueError("neighbor counts must be >= 1")
        if (self.k1, self.p1) == (self.k2, self.p2):
            raise ValueError("the two learners must differ in (k, p)")
        if self.max_iterations < 1 or self.pool_size < 1 or self.batch_per_iter < 1:
            raise ValueError("iteration, pool, and batch sizes must be >= 1")


def _minkowski(queries: np.ndarray, points: np.ndarray, p: float) -> np.ndarray:
    """Pairwise distances, shape [n_queries, n_points]."""
    diff = np.abs(queries[:, None, :] - points[None, :, :])
    if p == 2.0:
        return np.sqrt((diff**2).sum(axis=2))
    return (diff**p).sum(axis=2) ** (1.0 / p)


@dataclass
class KNNRegressor:
    """Brute-force k-NN mean with Minkowski metric; ties go to lower index."""

    X: np.ndarray
    y: np.ndarray
    k: int
    p: float

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.size:
            raise ValueError("X must be [n, d] with matching targets")

    def predict(self, queries: np.ndarray) -> np.ndarray:
        queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
        if queries.shape[1] != self.X.shape[1]:
            raise DimensionMismatch(
                f"query width {queries.shape[1]} != training width {self.X.shape[1]}"
            )
        dist = _minkowski(queries, self.X, self.p)
        k = min(self.k, self.X.shape[0])
        order = np.argsort(dist, axis=1, kind="stable")[:, :k]
        return self.y[order].mean(axis=1)


@dataclass
class FLModel:
    learner1: KNNRegressor
    learner2: KNNRegressor
    transcript: list[tuple[int, int, int, float, float]] = field(default_factory=list)


def relevance_scores(targets: np.ndarray) -> np.ndarray:
    """Absolute deviation from the target median, rescaled to [0, 1]."""
    targets = np.asarray(targets, dtype=np.float64)
    dev = np.abs(targets - np.median(targets))
    peak = dev.max()
    return dev / peak if peak > 0 else np.zeros_like(dev)


def smogn_resample(
    labeled: list[tuple[np.ndarray, float]], cfg: SmognConfig
) -> list[tuple[np.ndarray, float]]:
    """Oversample rare-target examples; originals are kept unchanged.

    Rare examples with a rare point among their k nearest neighbors are
    interpolated toward it (target interpolated along the same segment);
    isolated rare examples get Gaussian feature perturbation instead.
    """
    if len(labeled) < cfg.k_neighbors + 1:
        raise TooFewExamples(
            f"need >= {cfg.k_neighbors + 1} labeled examples, got {len(labeled)}"
        )
    X = np.array([np.asarray(f, dtype=np.float64) for f, _ in labeled])
    y = np.array([t for _, t in labeled], dtype=np.float64)
    if np.any(y < 0) or np.any(y > 1):
        raise TargetOutOfRange("targets must lie in [0, 1]")

    rel = relevance_scores(y)
    rare_idx = np.flatnonzero(rel > cfg.relevance_threshold)
    out = [(X[i].copy(), float(y[i])) for i in range(len(labeled))]
    if rare_idx.size == 0:
        return out

    rng = np.random.default_rng(cfg.seed)
    n_synth = int(np.ceil(cfg.oversample_ratio * rare_idx.size))
    dist = _minkowski(X[rare_idx], X, 2.0)
    feature_std = X.std(axis=0)
    rare_set = set(int(i) for i in rare_idx)

    for s in range(n_synth):
        a = int(rare_idx[s % rare_idx.size])
        row = int(np.flatnonzero(rare_idx == a)[0])
        order = np.argsort(dist[row], kind="stable")
        neighbors = [int(j) for j in order if j != a][: cfg.k_neighbors]
        rare_neighbors = [j for j in neighbors if j in rare_set]
        if rare_neighbors:
            b = int(rare_neighbors[rng.integers(len(rare_neighbors))])
            t = rng.random()
            feats = X[a] + t * (X[b] - X[a])
            target = (1.0 - t) * y[a] + t * y[b]
        else:
            feats = X[a] + rng.normal(0.0, 1.0, X.shape[1]) * feature_std * cfg.gaussian_perturbation
            target = y[a]
        out.append((feats, float(np.clip(target, 0.0, 1.0))))
    return out


def _loo_cache(X: np.ndarray, y: np.ndarray, k: int, p: float):
    """Per-point k nearest neighbors (self excluded) and leave-one-out means."""
    m = X.shape[0]
    dist = _minkowski(X, X, p)
    np.fill_diagonal(dist, np.inf)
    k_eff = min(k, m - 1)
    order = np.argsort(dist, axis=1, kind="stable")[:, :k_eff]
    nb_dist = np.take_along_axis(dist, order, axis=1)
    nb_targ = y[order]
    return nb_dist, nb_targ, nb_targ.mean(axis=1)


def coreg_train(
    labeled: list[tuple[np.ndarray, float]],
    unlabeled: list[np.ndarray],
    smogn: SmognConfig | None = None,
    cfg: CoregConfig = CoregConfig(),
) -> FLModel:
    """Co-train two k-NN learners with confident pseudo-labels.

    Each iteration, each learner scores a random pool of unlabeled points:
    a candidate's gain is the drop in the peer's leave-one-out squared
    error over the candidate's neighborhood when the pseudo-labeled point
    joins the peer's training set. Positive-gain candidates transfer (at
    most batch_per_iter per learner per iteration); training stops early
    once neither learner accepts anything.
    """
    if not labeled:
        raise EmptyLabeledSet("co-training needs at least one labeled example")
    base = smogn_resample(labeled, smogn) if smogn is not None else list(labeled)

    X0 = np.array([np.asarray(f, dtype=np.float64) for f, _ in base])
    y0 = np.array([t for _, t in base], dtype=np.float64)
    sets = [
        {"X": X0.copy(), "y": y0.copy(), "k": cfg.k1, "p": cfg.p1},
        {"X": X0.copy(), "y": y0.copy(), "k": cfg.k2, "p": cfg.p2},
    ]
    pool = [np.asarray(f, dtype=np.float64) for f in unlabeled]
    remaining = list(range(len(pool)))
    rng = np.random.default_rng(cfg.seed)
    transcript: list[tuple[int, int, int, float, float]] = []

    for iteration in range(cfg.max_iterations):
        accepted_any = False
        for selector in (0, 1):
            if not remaining:
                break
            peer = sets[1 - selector]
            own = sets[selector]
            own_model = KNNRegressor(own["X"], own["y"], own["k"], own["p"])
            nb_dist, nb_targ, loo_pred = _loo_cache(peer["X"], peer["y"], peer["k"], peer["p"])
            loo_err = (peer["y"] - loo_pred) ** 2
            k_eff = nb_dist.shape[1]

            pool_idx = rng.choice(
                len(remaining), size=min(cfg.pool_size, len(remaining)), replace=False
            )
            candidates = [remaining[int(i)] for i in pool_idx]
            cand_X = np.array([pool[i] for i in candidates])
            pseudo = own_model.predict(cand_X)
            dists = _minkowski(cand_X, peer["X"], peer["p"])

            gains = np.empty(len(candidates))
            for c in range(len(candidates)):
                near = np.argsort(dists[c], kind="stable")[:k_eff]
                delta = 0.0
                for n_idx in near:
                    # the new point replaces the farthest of the k current
                    # neighbors when strictly closer; ties keep the incumbent
                    if dists[c][n_idx] < nb_dist[n_idx, -1]:
                        new_pred = loo_pred[n_idx] + (pseudo[c] - nb_targ[n_idx, -1]) / k_eff
                        delta += loo_err[n_idx] - (peer["y"][n_idx] - new_pred) ** 2
                gains[c] = delta

            order = np.argsort(-gains, kind="stable")
            taken = 0
            for c in order:
                if gains[c] <= 0.0 or taken >= cfg.batch_per_iter:
                    break
                u = candidates[int(c)]
                peer["X"] = np.vstack([peer["X"], pool[u][None, :]])
                peer["y"] = np.append(peer["y"], pseudo[int(c)])
                remaining.remove(u)
                transcript.append(
                    (iteration, selector, u, float(pseudo[int(c)]), float(gains[c]))
                )
                taken += 1
                accepted_any = True
        if not accepted_any:
            break

    return FLModel(
        learner1=KNNRegressor(sets[0]["X"], sets[0]["y"], cfg.k1, cfg.p1),
        learner2=KNNRegressor(sets[1]["X"], sets[1]["y"], cfg.k2, cfg.p2),
        transcript=transcript,
    )


def predict_fl(model: FLModel, features: np.ndarray) -> float:
    """Mean of the two learners, clipped to [0, 1]."""
    features = np.asarray(features, dtype=np.float64).reshape(1, -1)
    value = 0.5 * (model.learner1.predict(features)[0] + model.learner2.predict(features)[0])
    return float(np.clip(value, 0.0, 1.0))


def predict_fl_batch(model: FLModel, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return np.clip(0.5 * (model.learner1.predict(X) + model.learner2.predict(X)), 0.0, 1.0)


def _pack_learner(learner: KNNRegressor) -> bytes:
    m, d = learner.X.shape
    return (
        struct.pack("<IIId", m, d, learner.k, learner.p)
        + np.ascontiguousarray(learner.X, dtype="<f8").tobytes()
        + np.ascontiguousarray(learner.y, dtype="<f8").tobytes()
    )


def _unpack_learner(blob: bytes, offset: int) -> tuple[KNNRegressor, int]:
    m, d, k, p = struct.unpack_from("<IIId", blob, offset)
    offset += struct.calcsize("<IIId")
    X = np.frombuffer(blob, dtype="<f8", count=m * d, offset=offset).reshape(m, d).copy()
    offset += 8 * m * d
    y = np.frombuffer(blob, dtype="<f8", count=m, offset=offset).copy()
    offset += 8 * m
    return KNNRegressor(X, y, k, p), offset


def save_fl_model(model: FLModel) -> bytes:
    return (
        MAGIC
        + struct.pack("<H", VERSION)
        + _pack_learner(model.learner1)
        + _pack_learner(model.learner2)
    )


def load_fl_model(blob: bytes) -> FLModel:
    if blob[:4] != MAGIC:
        raise ValueError("not a financial-literacy model file")
    (version,) = struct.unpack_from("<H", blob, 4)
    if version != VERSION:
        raise ValueError(f"unsupported model version {version}")
    learner1, offset = _unpack_learner(blob, 6)
    learner2, _ = _unpack_learner(blob, offset)
    return FLModel(learner1=learner1, learner2=learner2)
