"""Multi-scale cosine affinity and spectral clustering of embedding groups."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .formats import EmbeddingRecord, SpeakerTurn

DEFAULT_SEED = 42
MERGE_GAP_S = 0.1


@dataclass(frozen=True)
class ClusterResult:
    labels: np.ndarray
    k: int
    method: str = "oracle"


class RecordEmbedder:
    """Look up embeddings for planned windows from a list of records.

    A window takes the record of the same scale with identical (millisecond
    rounded) bounds. Without an exact match the record whose centre is nearest
    the window centre is used, unless ``exact`` is set.
    """

    def __init__(self, records: Sequence[EmbeddingRecord], exact: bool = False):
        self.exact = exact
        self._by_scale: dict[int, list[EmbeddingRecord]] = {}
        for rec in records:
            self._by_scale.setdefault(rec.scale_index, []).append(rec)
        self._index = {
            (r.scale_index, round(r.start_s, 3), round(r.end_s, 3)): r for r in records
        }
        self._centers = {
            s: np.array([(r.start_s + r.end_s) / 2 for r in recs]) for s, recs in self._by_scale.items()
        }

    def __call__(self, scale: int, start_s: float, end_s: float) -> EmbeddingRecord:
        rec = self._index.get((scale, round(start_s, 3), round(end_s, 3)))
        if rec is not None:
            return rec
        if self.exact or scale not in self._by_scale:
            raise KeyError(f"no embedding for scale {scale} window ({start_s:.3f}, {end_s:.3f})")
        i = int(np.argmin(np.abs(self._centers[scale] - (start_s + end_s) / 2)))
        return self._by_scale[scale][i]


Embedder = Callable[[int, float, float], EmbeddingRecord]


def gather_embeddings(embedder: Embedder, windows: Sequence[Sequence[tuple[float, float]]]) -> list[np.ndarray]:
    """Unit-normalised embedding matrix per scale, rows aligned with ``windows``."""
    out = []
    for s, scale in enumerate(windows):
        rows = []
        for start, end in scale:
            rec = embedder(s, start, end)
            norm = float(np.linalg.norm(rec.vec))
            if not norm > 0:
                raise ValueError(
                    f"zero-norm embedding at scale {rec.scale_index} window ({rec.start_s}, {rec.end_s})"
                )
            rows.append(rec.vec / norm)
        if rows and len({r.size for r in rows}) != 1:
            raise ValueError(f"scale {s} mixes embedding dimensions")
        out.append(np.vstack(rows) if rows else np.zeros((0, 0)))
    return out


def multi_scale_affinity(embeddings: Sequence[np.ndarray], groups: np.ndarray, weights: Sequence[float]) -> np.ndarray:
    """Weighted sum over scales of the cosine similarity between groups.

    Args:
        embeddings: per-scale ``(n_windows, dim)`` matrices.
        groups: ``(n_groups, n_scales)`` window indices, see
            :func:`diarkit.segmentation.group_by_base_scale`.
        weights: per-scale weights summing to 1.
    """
    groups = np.asarray(groups, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.float64)
    if groups.ndim != 2 or groups.shape[1] != len(embeddings) or len(weights) != len(embeddings):
        raise ValueError("groups, embeddings and weights disagree on the number of scales")
    if abs(weights.sum() - 1.0) > 1e-9:
        raise ValueError("scale weights must sum to 1")
    n = groups.shape[0]
    aff = np.zeros((n, n))
    for s, emb in enumerate(embeddings):
        if weights[s] == 0:
            continue
        vecs = np.asarray(emb, dtype=np.float64)[groups[:, s]]
        norms = np.linalg.norm(vecs, axis=1)
        if np.any(norms == 0):
            raise ValueError(f"zero-norm embedding at scale {s}, window {int(groups[np.argmin(norms), s])}")
        unit = vecs / norms[:, None]
        aff += weights[s] * (unit @ unit.T)
    aff = 0.5 * (aff + aff.T)
    aff = np.clip(aff, -1.0, 1.0)
    np.fill_diagonal(aff, 1.0)
    return aff


def normalized_laplacian(aff: np.ndarray) -> np.ndarray:
    """``I - D^-1/2 A D^-1/2`` with negative affinities clamped to 0."""
    a = np.clip(np.asarray(aff, dtype=np.float64), 0.0, None)
    deg = a.sum(axis=1)
    inv = np.zeros_like(deg)
    nz = deg > 0
    inv[nz] = 1.0 / np.sqrt(deg[nz])
    lap = np.eye(len(a)) - inv[:, None] * a * inv[None, :]
    return 0.5 * (lap + lap.T)


def estimate_num_speakers(aff: np.ndarray, max_k: int = 8) -> int:
    """Position of the largest eigen-gap of the normalised Laplacian, capped at ``max_k``.

    The gap is searched over the whole spectrum and the result clamped
    afterwards, so three clean blocks with ``max_k=2`` give 2 rather than the
    meaningless argmax of an all-zero gap window.
    """
    n = len(aff)
    if n < 2:
        return 1
    if max_k < 1:
        raise ValueError("max_k must be >= 1")
    eig = np.linalg.eigvalsh(normalized_laplacian(aff))
    k = int(np.argmax(np.diff(eig))) + 1
    return min(k, max_k)


def kmeans(x: np.ndarray, k: int, seed: int = DEFAULT_SEED, max_iter: int = 300, tol: float = 1e-6) -> np.ndarray:
    """Lloyd's k-means with k-means++ seeding. Returns labels.

    Empty clusters are refilled with the point farthest from its centroid, so
    every label in ``range(k)`` is used whenever ``len(x) >= k``.
    """
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k} n={n}")
    rng = np.random.default_rng(seed)
    centers = np.empty((k, x.shape[1]))
    chosen = [int(rng.integers(n))]
    d2 = np.sum((x - x[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            free = np.setdiff1d(np.arange(n), chosen)
            nxt = int(rng.choice(free))
        chosen.append(nxt)
        d2 = np.minimum(d2, np.sum((x - x[nxt]) ** 2, axis=1))
    centers[:] = x[chosen]

    labels = np.zeros(n, dtype=np.int64)
    for _ in range(max_iter):
        dist = np.sum((x[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        labels = np.argmin(dist, axis=1)
        for c in range(k):
            if not np.any(labels == c):
                own = dist[np.arange(n), labels]
                counts = np.bincount(labels, minlength=k)
                own[counts[labels] <= 1] = -1.0
                far = int(np.argmax(own))
                labels[far] = c
        new = np.vstack([x[labels == c].mean(axis=0) for c in range(k)])
        shift = float(np.sum((new - centers) ** 2))
        centers = new
        if shift <= tol:
            break
    dist = np.sum((x[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    final = np.argmin(dist, axis=1)
    if len(np.unique(final)) == k:
        labels = final
    return labels


def _first_appearance(labels: np.ndarray) -> np.ndarray:
    order = {}
    for lab in labels:
        order.setdefault(int(lab), len(order))
    return np.array([order[int(lab)] for lab in labels], dtype=np.int64)


def spectral_cluster(aff: np.ndarray, k: int, seed: int = DEFAULT_SEED, method: str = "oracle") -> ClusterResult:
    """Normalised spectral clustering (Ng-Jordan-Weiss).

    Labels are renumbered in order of first appearance, so results are
    comparable across seeds up to the partition itself.
    """
    n = len(aff)
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k} n={n}")
    if k == 1:
        return ClusterResult(np.zeros(n, dtype=np.int64), 1, method)
    if k == n:
        return ClusterResult(np.arange(n, dtype=np.int64), k, method)
    _, vecs = np.linalg.eigh(normalized_laplacian(aff))
    emb = vecs[:, :k]
    norms = np.linalg.norm(emb, axis=1, keepdims=True)
    emb = emb / np.where(norms > 0, norms, 1.0)
    labels = kmeans(emb, k, seed=seed)
    return ClusterResult(_first_appearance(labels), k, method)


def labels_to_turns(
    base_windows: Sequence[tuple[float, float]], labels: Sequence[int], file_id: str, merge_gap_s: float = MERGE_GAP_S
) -> list[SpeakerTurn]:
    """Merge labelled base windows into speaker turns.

    Consecutive windows with the same label are joined when the gap between
    them is at most ``merge_gap_s``. Where overlapping windows carry different
    labels the boundary is placed at the middle of their overlap.
    """
    if len(base_windows) != len(labels):
        raise ValueError("one label per base window required")
    spans: list[list] = []
    for (start, end), lab in zip(base_windows, labels):
        lab = int(lab)
        if spans and spans[-1][2] == lab and start - spans[-1][1] <= merge_gap_s + 1e-9:
            spans[-1][1] = max(spans[-1][1], end)
            continue
        if spans and start < spans[-1][1]:
            cut = max((start + spans[-1][1]) / 2, spans[-1][0])
            spans[-1][1] = cut
            start = cut
        spans.append([start, end, lab])
    return [
        SpeakerTurn(file_id, 1, a, b - a, f"speaker_{lab}") for a, b, lab in spans if b > a
    ]
