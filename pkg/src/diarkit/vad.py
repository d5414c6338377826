"""Frame-level speech evidence: conversion, fusion and hysteresis decoding."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .formats import DEFAULT_FRAME_MS, FrameTrack, SpeakerTurn, Word

# Seconds-to-frame conversions snap values within this many frames of a grid
# line onto it, so 1.10 s / 20 ms lands on frame 55 and not 55.000000001.
_GRID_EPS = 1e-6


@dataclass(frozen=True)
class VadThresholds:
    onset: float = 0.7
    offset: float = 0.3
    min_duration_on_s: float = 0.1
    min_duration_off_s: float = 0.1
    pad_onset_s: float = 0.0
    pad_offset_s: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.offset <= self.onset <= 1.0:
            raise ValueError(f"need 0 <= offset <= onset <= 1, got onset={self.onset} offset={self.offset}")
        for name in ("min_duration_on_s", "min_duration_off_s", "pad_onset_s", "pad_offset_s"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class FusionWeight:
    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")


@dataclass(frozen=True, order=True)
class SpeechSegment:
    start_s: float
    end_s: float

    def __post_init__(self):
        if not self.end_s > self.start_s:
            raise ValueError(f"segment end {self.end_s} <= start {self.start_s}")

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


@dataclass(frozen=True)
class WindowScore:
    start_s: float
    end_s: float
    prob: float

    def __post_init__(self):
        if not self.end_s > self.start_s:
            raise ValueError("window must have positive length")
        if not 0.0 <= self.prob <= 1.0:
            raise ValueError(f"window probability {self.prob} outside [0, 1]")


def _frame_span(start_s: float, end_s: float, frame_ms: int, total_frames: int) -> tuple[int, int]:
    """Half-open range of frames whose interval overlaps ``[start_s, end_s)``."""
    a = start_s * 1000.0 / frame_ms
    b = end_s * 1000.0 / frame_ms
    first = max(0, math.floor(a + _GRID_EPS))
    last = min(total_frames, math.ceil(b - _GRID_EPS))
    return first, max(first, last)


def _intervals_to_frames(intervals, frame_ms: int, total_frames: int) -> np.ndarray:
    marks = np.zeros(total_frames + 1, dtype=np.int64)
    for start, end in intervals:
        a, b = _frame_span(start, end, frame_ms, total_frames)
        if b > a:
            marks[a] += 1
            marks[b] -= 1
    return (np.cumsum(marks[:-1]) > 0).astype(np.float64)


def words_to_frames(words: Iterable[Word], frame_ms: int = DEFAULT_FRAME_MS, total_frames: int = 0) -> FrameTrack:
    """Binary ASR track: 1 for every frame overlapping a word interval.

    Words running past ``total_frames`` are clipped.
    """
    if total_frames < 0:
        raise ValueError("total_frames must be >= 0")
    probs = _intervals_to_frames(((w.start_s, w.end_s) for w in words), frame_ms, total_frames)
    return FrameTrack(probs, frame_ms=frame_ms, origin="asr")


def segments_to_frames(
    segments: Iterable[SpeechSegment], frame_ms: int = DEFAULT_FRAME_MS, total_frames: int = 0, origin: str = "reference"
) -> FrameTrack:
    probs = _intervals_to_frames(((s.start_s, s.end_s) for s in segments), frame_ms, total_frames)
    return FrameTrack(probs, frame_ms=frame_ms, origin=origin)


def merge_window_scores(
    windows: Sequence[WindowScore], frame_ms: int = DEFAULT_FRAME_MS, total_frames: int = 0
) -> FrameTrack:
    """Average overlapping window scores onto the frame grid.

    A frame takes the mean probability of every window covering its midpoint;
    uncovered frames get 0.
    """
    total = np.zeros(total_frames + 1)
    count = np.zeros(total_frames + 1)
    for w in windows:
        # frames i with start <= (i + 0.5) * frame < end
        a = max(0, math.ceil(w.start_s * 1000.0 / frame_ms - 0.5 - _GRID_EPS))
        b = min(total_frames, math.ceil(w.end_s * 1000.0 / frame_ms - 0.5 - _GRID_EPS))
        if b > a:
            total[a] += w.prob
            total[b] -= w.prob
            count[a] += 1
            count[b] -= 1
    sums = np.cumsum(total[:-1])
    counts = np.cumsum(count[:-1])
    probs = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
    return FrameTrack(np.clip(probs, 0.0, 1.0), frame_ms=frame_ms, origin="frame_vad")


def fuse(frame_vad: FrameTrack, asr: FrameTrack, weight: FusionWeight | float) -> FrameTrack:
    """Per-frame weighted sum ``alpha * frame_vad + (1 - alpha) * asr``.

    The shorter track is zero-padded. The result is clamped to the pointwise
    ``[min, max]`` of its inputs, which removes rounding overshoot and makes
    ``alpha`` in ``{0, 1}`` and equal inputs reproduce the source exactly.
    """
    if not isinstance(weight, FusionWeight):
        weight = FusionWeight(float(weight))
    if frame_vad.frame_ms != asr.frame_ms:
        raise ValueError(f"frame size mismatch: {frame_vad.frame_ms} ms vs {asr.frame_ms} ms")
    n = max(len(frame_vad), len(asr))
    a = np.zeros(n)
    b = np.zeros(n)
    a[: len(frame_vad)] = frame_vad.probs
    b[: len(asr)] = asr.probs
    alpha = weight.alpha
    y = alpha * a + (1.0 - alpha) * b
    y = np.clip(y, np.minimum(a, b), np.maximum(a, b))
    return FrameTrack(y, frame_ms=frame_vad.frame_ms, origin="fused")


def _hysteresis_runs(probs: np.ndarray, onset: float, offset: float) -> list[tuple[int, int]]:
    runs = []
    active = False
    start = 0
    for i, p in enumerate(probs):
        if active:
            if p < offset:
                runs.append((start, i))
                active = False
        elif p >= onset:
            active = True
            start = i
    if active:
        runs.append((start, len(probs)))
    return runs


def hysteresis_decode(track: FrameTrack, th: VadThresholds | None = None) -> list[SpeechSegment]:
    """Decode a probability track into speech segments.

    Speech starts at the first frame with ``prob >= onset`` and lasts until the
    first frame with ``prob < offset``. Segments are then padded, joined across
    gaps shorter than ``min_duration_off_s`` and finally dropped when shorter
    than ``min_duration_on_s``.
    """
    th = th or VadThresholds()
    fm = track.frame_ms
    duration = len(track) * fm / 1000.0
    spans = [
        [max(0.0, a * fm / 1000.0 - th.pad_onset_s), min(duration, b * fm / 1000.0 + th.pad_offset_s)]
        for a, b in _hysteresis_runs(track.probs, th.onset, th.offset)
    ]
    merged: list[list[float]] = []
    for span in spans:
        if merged and span[0] - merged[-1][1] < th.min_duration_off_s:
            merged[-1][1] = max(merged[-1][1], span[1])
        else:
            merged.append(span)
    return [
        SpeechSegment(a, b) for a, b in merged if b > a and b - a >= th.min_duration_on_s
    ]


def speech_to_turns(segments: Iterable[SpeechSegment], file_id: str, speaker: str = "speech") -> list[SpeakerTurn]:
    return [SpeakerTurn(file_id, 1, s.start_s, s.end_s - s.start_s, speaker) for s in segments]


def turns_to_speech(turns: Iterable[SpeakerTurn]) -> list[SpeechSegment]:
    """Union of turn intervals as sorted, non-overlapping speech segments."""
    spans = sorted((t.start_s, t.end_s) for t in turns)
    out: list[list[float]] = []
    for a, b in spans:
        if out and a <= out[-1][1]:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return [SpeechSegment(a, b) for a, b in out]
