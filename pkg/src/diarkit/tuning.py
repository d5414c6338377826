"""Exhaustive search over onset, offset and fusion weight on a development set."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .clustering import Embedder
from .formats import FrameTrack, SpeakerTurn
from .pipeline import RunConfig, diarize_tracks
from .scoring import der
from .vad import SpeechSegment, turns_to_speech

_DECIMALS = 10


def frange(start: float, stop: float, step: float) -> tuple[float, ...]:
    """Inclusive arithmetic range with values rounded to kill float drift."""
    if step <= 0:
        raise ValueError("step must be positive")
    if stop < start:
        raise ValueError("range stop below start")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return tuple(round(start + i * step, _DECIMALS) for i in range(n))


def parse_range(text: str) -> tuple[float, ...]:
    """``"0.3:0.9:0.05"`` -> inclusive range; a bare number is a single point."""
    parts = text.split(":")
    if len(parts) == 1:
        return (float(parts[0]),)
    if len(parts) != 3:
        raise ValueError(f"expected start:stop:step, got {text!r}")
    return frange(*(float(p) for p in parts))


@dataclass(frozen=True)
class GridSpec:
    onset: tuple[float, ...] = frange(0.3, 0.9, 0.05)
    offset: tuple[float, ...] = frange(0.1, 0.8, 0.05)
    alpha: tuple[float, ...] = frange(0.0, 1.0, 0.05)

    def __post_init__(self):
        for name in ("onset", "offset", "alpha"):
            values = tuple(getattr(self, name))
            if not values:
                raise ValueError(f"{name} grid is empty")
            if min(values) < 0 or max(values) > 1:
                raise ValueError(f"{name} grid must lie within [0, 1]")
            object.__setattr__(self, name, values)

    def triples(self) -> list[tuple[float, float, float]]:
        """Feasible ``(onset, offset, alpha)`` points; pairs with offset > onset are skipped."""
        return [
            (on, off, a) for a in self.alpha for on in self.onset for off in self.offset if off <= on
        ]

    @property
    def n_infeasible(self) -> int:
        pairs = sum(1 for on in self.onset for off in self.offset if off > on)
        return pairs * len(self.alpha)


@dataclass
class DevItem:
    file_id: str
    frame_vad: FrameTrack
    ref: list[SpeakerTurn]
    asr: FrameTrack | None = None
    embedder: Embedder | None = None


@dataclass(frozen=True)
class TrialResult:
    onset: float
    offset: float
    alpha: float
    total_ref_speech_s: float
    fa_s: float
    miss_s: float
    cer_s: float

    @property
    def mean_fa(self) -> float:
        return self.fa_s / self.total_ref_speech_s

    @property
    def mean_miss(self) -> float:
        return self.miss_s / self.total_ref_speech_s

    @property
    def mean_cer(self) -> float:
        return self.cer_s / self.total_ref_speech_s

    @property
    def mean_der(self) -> float:
        return self.mean_fa + self.mean_miss + self.mean_cer

    def sort_key(self):
        return (round(self.mean_der, 12), round(self.mean_fa, 12), self.onset, self.offset, -self.alpha)


@dataclass
class FailedTrial:
    onset: float
    offset: float
    alpha: float
    file_id: str
    cause: str


@dataclass
class GridSearchResult:
    ranking: list[TrialResult]
    failed: list[FailedTrial] = field(default_factory=list)
    n_evaluated: int = 0
    n_infeasible_skipped: int = 0

    @property
    def best(self) -> TrialResult:
        if not self.ranking:
            raise ValueError("no successful trials")
        return self.ranking[0]

    def summary(self) -> dict:
        return {
            "evaluated": self.n_evaluated,
            "infeasible_skipped": self.n_infeasible_skipped,
            "ranked": len(self.ranking),
            "failed": len(self.failed),
        }


def _run_trial(dev: Sequence[DevItem], base: RunConfig, k_mode, triple):
    onset, offset, alpha = triple
    cfg = replace(base, onset=onset, offset=offset, alpha=alpha)
    if k_mode not in ("oracle", "auto"):
        cfg = replace(cfg, num_speakers=int(k_mode))
    else:
        cfg = replace(cfg, num_speakers=k_mode)
    total = fa = miss = cer = 0.0
    for item in dev:
        try:
            oracle_k = len({t.speaker for t in item.ref})
            result = diarize_tracks(
                item.frame_vad,
                cfg,
                asr=item.asr,
                embedder=item.embedder,
                file_id=item.file_id,
                oracle_k=oracle_k,
            )
            rep = der(item.ref, result.turns, cfg.collar_s, cfg.score_overlap)
        except Exception as exc:  # any stage failure excludes the trial
            return FailedTrial(onset, offset, alpha, item.file_id, f"{type(exc).__name__}: {exc}")
        total += rep.total_ref_speech_s
        fa += rep.fa_s
        miss += rep.miss_s
        cer += rep.cer_s
    return TrialResult(onset, offset, alpha, total, fa, miss, cer)


def grid_search(
    dev: Sequence[DevItem],
    grid: GridSpec | None = None,
    k_mode: str | int = "oracle",
    base: RunConfig | None = None,
    workers: int = 1,
) -> GridSearchResult:
    """Run the full pipeline for every feasible grid point and rank by pooled DER.

    Files are pooled by duration (component seconds are summed before
    dividing). Ties fall back to lower false-alarm rate, then lower onset.
    When no item carries an embedder the pipeline runs in VAD-only mode.
    """
    if not dev:
        raise ValueError("development set is empty")
    grid = grid or GridSpec()
    base = base or RunConfig()
    if all(item.embedder is None for item in dev):
        base = replace(base, vad_only=True)
    triples = grid.triples()
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        outcomes = list(pool.map(lambda t: _run_trial(dev, base, k_mode, t), triples))
    ranking = sorted((o for o in outcomes if isinstance(o, TrialResult)), key=TrialResult.sort_key)
    failed = [o for o in outcomes if isinstance(o, FailedTrial)]
    return GridSearchResult(ranking, failed, len(triples), grid.n_infeasible)


def vad_metrics(decoded: Sequence[SpeechSegment], ref: Sequence[SpeakerTurn]) -> tuple[float, float]:
    """Speech/non-speech false-alarm and miss rates, normalised by reference speech."""
    ref_speech = turns_to_speech(ref)
    total = sum(s.duration_s for s in ref_speech)
    if total <= 0:
        raise ValueError("no reference speech")
    hyp = turns_to_speech(SpeakerTurn("_", 1, s.start_s, s.duration_s, "speech") for s in decoded)
    inter = _intersection(ref_speech, hyp)
    hyp_total = sum(s.duration_s for s in hyp)
    return (hyp_total - inter) / total, (total - inter) / total


def _intersection(a: Sequence[SpeechSegment], b: Sequence[SpeechSegment]) -> float:
    i = j = 0
    out = 0.0
    while i < len(a) and j < len(b):
        lo = max(a[i].start_s, b[j].start_s)
        hi = min(a[i].end_s, b[j].end_s)
        if hi > lo:
            out += hi - lo
        if a[i].end_s < b[j].end_s:
            i += 1
        else:
            j += 1
    return out


TRIALS_COLUMNS = ("onset", "offset", "alpha", "der", "fa", "miss", "cer")


def write_trials_csv(ranking: Sequence[TrialResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRIALS_COLUMNS)
    for t in ranking:
        writer.writerow(
            [f"{t.onset:g}", f"{t.offset:g}", f"{t.alpha:g}"]
            + [f"{v:.6f}" for v in (t.mean_der, t.mean_fa, t.mean_miss, t.mean_cer)]
        )
    return buf.getvalue()
