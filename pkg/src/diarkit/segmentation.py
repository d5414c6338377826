"""Multi-scale embedding windows over decoded speech."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .vad import SpeechSegment

_EPS = 1e-9

Window = tuple[float, float]


@dataclass(frozen=True)
class ScaleSpec:
    window_s: float
    hop_s: float

    def __post_init__(self):
        if not 0 < self.hop_s <= self.window_s:
            raise ValueError(f"need 0 < hop <= window, got window={self.window_s} hop={self.hop_s}")


def _default_scales() -> tuple[ScaleSpec, ...]:
    return tuple(ScaleSpec(w, w / 2) for w in (1.5, 1.25, 1.0, 0.75, 0.5))


@dataclass(frozen=True)
class MultiScalePlan:
    """Scales ordered coarsest first; the last one is the base (finest) scale."""

    scales: tuple[ScaleSpec, ...] = field(default_factory=_default_scales)
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        scales = tuple(self.scales)
        if not scales:
            raise ValueError("a plan needs at least one scale")
        object.__setattr__(self, "scales", scales)
        weights = self.weights
        if weights is None:
            weights = tuple([1.0 / len(scales)] * len(scales))
        weights = tuple(float(w) for w in weights)
        if len(weights) != len(scales):
            raise ValueError("one weight per scale required")
        if any(w < 0 for w in weights) or abs(sum(weights) - 1.0) > 1e-9:
            raise ValueError(f"weights must be non-negative and sum to 1, got {weights}")
        object.__setattr__(self, "weights", weights)
        for coarse, fine in zip(scales, scales[1:]):
            if fine.window_s > coarse.window_s:
                raise ValueError("scales must be ordered from coarsest to finest")

    @classmethod
    def from_lists(cls, windows: Sequence[float], hops: Sequence[float], weights=None) -> MultiScalePlan:
        if len(windows) != len(hops):
            raise ValueError("need one hop per window length")
        return cls(tuple(ScaleSpec(w, h) for w, h in zip(windows, hops)), None if weights is None else tuple(weights))


def _segment_windows(seg: SpeechSegment, scale: ScaleSpec) -> list[Window]:
    start, end = seg.start_s, seg.end_s
    length = end - start
    w, h = scale.window_s, scale.hop_s
    if length < w - _EPS:
        return [(start, end)]
    n = math.floor((length - w) / h + _EPS) + 1
    out = [(start + k * h, start + k * h + w) for k in range(n)]
    last_end = out[-1][1]
    if end - last_end >= w / 2 - _EPS:
        out.append((end - w, end))
    # snap the final window onto the segment end to absorb rounding
    if abs(out[-1][1] - end) < 1e-7:
        out[-1] = (out[-1][0], end)
    return out


def plan_windows(speech: Sequence[SpeechSegment], plan: MultiScalePlan | None = None) -> list[list[Window]]:
    """Slice every speech segment into windows at each scale of ``plan``.

    Returns one list of ``(start_s, end_s)`` per scale, in plan order, windows
    sorted by time.
    """
    plan = plan or MultiScalePlan()
    return [[win for seg in speech for win in _segment_windows(seg, scale)] for scale in plan.scales]


def _segment_ids(windows: Sequence[Window], speech: Sequence[SpeechSegment]) -> np.ndarray:
    starts = np.array([s.start_s for s in speech])
    centers = np.array([(a + b) / 2 for a, b in windows])
    return np.searchsorted(starts, centers + _EPS, side="right") - 1


def group_by_base_scale(
    windows: Sequence[Sequence[Window]], speech: Sequence[SpeechSegment] | None = None
) -> np.ndarray:
    """Align every base-scale window with its nearest window at each coarser scale.

    Args:
        windows: per-scale window lists as returned by :func:`plan_windows`.
        speech: the segments the windows were planned from. When given,
            candidates are restricted to windows from the same segment.

    Returns:
        Integer array of shape ``(n_base, n_scales)``; column ``s`` holds the
        index of the chosen window at scale ``s`` (the last column is the base
        window itself). Ties go to the earlier window.
    """
    if not windows:
        return np.zeros((0, 0), dtype=np.int64)
    base = windows[-1]
    n_scales = len(windows)
    groups = np.zeros((len(base), n_scales), dtype=np.int64)
    groups[:, -1] = np.arange(len(base))
    if not base:
        return groups
    base_centers = np.array([(a + b) / 2 for a, b in base])
    base_seg = _segment_ids(base, speech) if speech is not None else None
    for s in range(n_scales - 1):
        scale = windows[s]
        if not scale:
            raise ValueError(f"scale {s} has no windows while the base scale has {len(base)}")
        centers = np.array([(a + b) / 2 for a, b in scale])
        dist = np.abs(base_centers[:, None] - centers[None, :])
        if base_seg is not None:
            seg = _segment_ids(scale, speech)
            dist = np.where(base_seg[:, None] == seg[None, :], dist, np.inf)
            unmatched = ~np.isfinite(dist).any(axis=1)
            if unmatched.any():
                raise ValueError(f"scale {s} has no window in the speech segment of base window {int(np.argmax(unmatched))}")
        # argmin returns the first minimum, i.e. the earlier window on ties
        groups[:, s] = np.argmin(np.round(dist, 9), axis=1)
    return groups
