"""Templates, probe fusion, similarity scoring, and genuine/impostor pairs.

All similarity metrics are oriented so that higher means more similar:
cosine and pearson in [-1, 1], euclidean as the negated distance.
"""

from dataclasses import dataclass

import numpy as np

from .core import METRIC_NAMES
from .errors import (
    ConstantVector,
    EmptyEnrollment,
    NoGenuinePairs,
    ZeroVector,
)
from .util import sub_rng


@dataclass(frozen=True)
class Template:
    vector: np.ndarray
    subject_id: str
    fusion: str
    source_count: int
    source_sessions: tuple[str, ...]


@dataclass(frozen=True)
class ScoreMatrix:
    """probes x gallery scores; columns are unique subjects in ascending order."""
    scores: np.ndarray
    probe_subjects: tuple[str, ...]
    gallery_subjects: tuple[str, ...]

    def __post_init__(self):
        if self.scores.shape != (len(self.probe_subjects), len(self.gallery_subjects)):
            raise ValueError("score matrix shape mismatch")
        if len(set(self.gallery_subjects)) != len(self.gallery_subjects):
            raise ValueError("gallery subjects must be unique")
        if not np.all(np.isfinite(self.scores)):
            raise ValueError("scores must be finite")


@dataclass(frozen=True)
class PairScores:
    genuine: np.ndarray
    impostor: np.ndarray
    sampling: str = "all"
    seed: int | None = None


def similarity(a, b, metric: str = "cosine") -> float:
    """Similarity between two vectors under the configured metric."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 2:
        raise ValueError("similarity needs two equal-length vectors of dim >= 2")
    if metric == "cosine":
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        if na == 0.0 or nb == 0.0:
            raise ZeroVector("cosine undefined for all-zero vectors")
        return float(a @ b / (na * nb))
    if metric == "pearson":
        ca, cb = a - a.mean(), b - b.mean()
        na, nb = np.linalg.norm(ca), np.linalg.norm(cb)
        if na == 0.0 or nb == 0.0:
            raise ConstantVector("pearson undefined for constant vectors")
        return float(ca @ cb / (na * nb))
    if metric == "euclidean":
        return float(-np.linalg.norm(a - b))
    raise ValueError(f"metric must be one of {METRIC_NAMES}, got {metric!r}")


def _distance(a, b, metric: str) -> float:
    return 1.0 - similarity(a, b, metric)


def build_template(embeddings, subject_id: str, fusion: str = "mean",
                   size="all", metric: str = "cosine",
                   source_sessions=()) -> Template:
    """Fuse the first min(size, count) enrollment embeddings (chronological).

    mean: element-wise average. representative: the medoid, i.e. the member
    minimizing the summed distance (1 - similarity) to the other selected
    members; ties break toward the earliest position. The medoid is returned
    bit-for-bit, not recomputed.
    """
    embeddings = [np.asarray(e, dtype=float) for e in embeddings]
    if not embeddings:
        raise EmptyEnrollment(f"no enrollment embeddings for {subject_id}")
    dims = {e.shape for e in embeddings}
    if len(dims) != 1:
        raise ValueError(f"mixed embedding dimensions {dims}")
    count = len(embeddings) if size == "all" else min(int(size), len(embeddings))
    chosen = embeddings[:count]
    if fusion == "mean":
        vector = np.mean(chosen, axis=0)
    elif fusion == "representative":
        if len(chosen) == 1:
            vector = chosen[0].copy()
        else:
            costs = [
                sum(_distance(c, other, metric) for j, other in enumerate(chosen) if j != i)
                for i, c in enumerate(chosen)
            ]
            vector = chosen[int(np.argmin(costs))].copy()
    else:
        raise ValueError(f"fusion must be mean or representative, got {fusion!r}")
    return Template(vector=vector, subject_id=subject_id, fusion=fusion,
                    source_count=count, source_sessions=tuple(source_sessions))


def fuse_probes(embeddings, k: int) -> list[np.ndarray]:
    """Mean-fuse consecutive non-overlapping groups of k probe embeddings.

    A trailing group smaller than k is dropped, except when the record has
    fewer than k embeddings in total: then all of them fuse into one probe.
    """
    if k < 1:
        raise ValueError("probe fusion size must be >= 1")
    embeddings = [np.asarray(e, dtype=float) for e in embeddings]
    if not embeddings:
        raise ValueError("fuse_probes needs a non-empty embedding list")
    if k == 1:
        return [e.copy() for e in embeddings]
    if len(embeddings) < k:
        return [np.mean(embeddings, axis=0)]
    n_groups = len(embeddings) // k
    return [np.mean(embeddings[i * k: (i + 1) * k], axis=0) for i in range(n_groups)]


def score_matrix(gallery, probes, probe_subjects, metric: str = "cosine") -> ScoreMatrix:
    """All probe-template similarities; rows in probe order, columns by subject.

    gallery: iterable of Template; probes: iterable of vectors with their true
    subject ids alongside.
    """
    gallery = sorted(gallery, key=lambda t: t.subject_id)
    probes = [np.asarray(p, dtype=float) for p in probes]
    if not gallery or not probes:
        raise ValueError("score_matrix needs a non-empty gallery and probes")
    g = np.stack([t.vector for t in gallery])
    p = np.stack(probes)
    if metric == "cosine":
        gn = np.linalg.norm(g, axis=1)
        pn = np.linalg.norm(p, axis=1)
        if np.any(gn == 0.0) or np.any(pn == 0.0):
            raise ZeroVector("cosine undefined for all-zero vectors")
        scores = (p / pn[:, None]) @ (g / gn[:, None]).T
    elif metric == "pearson":
        gc = g - g.mean(axis=1, keepdims=True)
        pc = p - p.mean(axis=1, keepdims=True)
        gn = np.linalg.norm(gc, axis=1)
        pn = np.linalg.norm(pc, axis=1)
        if np.any(gn == 0.0) or np.any(pn == 0.0):
            raise ConstantVector("pearson undefined for constant vectors")
        scores = (pc / pn[:, None]) @ (gc / gn[:, None]).T
    elif metric == "euclidean":
        sq = (np.sum(p**2, axis=1)[:, None] + np.sum(g**2, axis=1)[None, :]
              - 2.0 * (p @ g.T))
        scores = -np.sqrt(np.maximum(sq, 0.0))
    else:
        raise ValueError(f"metric must be one of {METRIC_NAMES}, got {metric!r}")
    return ScoreMatrix(
        scores=scores,
        probe_subjects=tuple(probe_subjects),
        gallery_subjects=tuple(t.subject_id for t in gallery),
    )


def generate_pairs(matrix: ScoreMatrix, mode: str = "balanced",
                   seed: int = 0) -> PairScores:
    """Genuine scores are the own-subject cells; impostors the rest.

    balanced samples min(|genuine|, |impostors|) impostor cells uniformly
    without replacement with the given seed; all keeps every impostor cell.
    """
    genuine_mask = np.array(
        [[p == g for g in matrix.gallery_subjects] for p in matrix.probe_subjects])
    genuine = matrix.scores[genuine_mask]
    impostor = matrix.scores[~genuine_mask]
    if genuine.size == 0:
        raise NoGenuinePairs("no probe has its subject in the gallery")
    if impostor.size == 0:
        raise NoGenuinePairs("gallery of one subject yields no impostor cells")
    if mode == "all":
        return PairScores(genuine=genuine.copy(), impostor=impostor.copy(),
                          sampling="all")
    if mode == "balanced":
        take = min(genuine.size, impostor.size)
        idx = sub_rng(seed, "impostor-sample").choice(impostor.size, size=take,
                                                      replace=False)
        return PairScores(genuine=genuine.copy(), impostor=impostor[np.sort(idx)],
                          sampling="balanced", seed=seed)
    raise ValueError(f"mode must be balanced or all, got {mode!r}")
