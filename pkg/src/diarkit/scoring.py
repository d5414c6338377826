"""Diarization error rate with optimal speaker mapping, plus error analyses.

DER is computed by interval algebra: the timeline is cut at every turn
boundary, and on each elementary interval the active reference set ``R`` and
hypothesis set ``H`` are compared under a one-to-one speaker mapping chosen
to maximise the mapped overlap time.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .formats import SpeakerTurn

BUCKETS = ("short", "medium", "long")
ERROR_TYPES = ("CER", "FA", "MISS", "Correct")
FA_ATTRIBUTION = (
    "false-alarm time is attributed to the duration bucket of the hypothesis turn "
    "that produced it and to the role of that hypothesis speaker's mapped reference speaker"
)


@dataclass
class DerReport:
    total_ref_speech_s: float
    fa_s: float
    miss_s: float
    cer_s: float
    collar_s: float = 0.0
    score_overlap: bool = True
    mapping: dict[str, dict[str, str]] = field(default_factory=dict)

    def __post_init__(self):
        if self.total_ref_speech_s <= 0:
            raise ValueError("no reference speech")
        if min(self.fa_s, self.miss_s, self.cer_s) < 0:
            raise ValueError("error components must be non-negative")

    @property
    def fa_rate(self) -> float:
        return self.fa_s / self.total_ref_speech_s

    @property
    def miss_rate(self) -> float:
        return self.miss_s / self.total_ref_speech_s

    @property
    def cer_rate(self) -> float:
        return self.cer_s / self.total_ref_speech_s

    @property
    def der(self) -> float:
        return self.fa_rate + self.miss_rate + self.cer_rate

    def to_dict(self) -> dict:
        return {
            "der": self.der,
            "fa_rate": self.fa_rate,
            "miss_rate": self.miss_rate,
            "cer_rate": self.cer_rate,
            "total_ref_speech_s": self.total_ref_speech_s,
            "fa_s": self.fa_s,
            "miss_s": self.miss_s,
            "cer_s": self.cer_s,
            "collar_s": self.collar_s,
            "score_overlap": self.score_overlap,
            "mapping": self.mapping,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> DerReport:
        return cls(
            float(d["total_ref_speech_s"]),
            float(d["fa_s"]),
            float(d["miss_s"]),
            float(d["cer_s"]),
            float(d.get("collar_s", 0.0)),
            bool(d.get("score_overlap", True)),
            {k: dict(v) for k, v in d.get("mapping", {}).items()},
        )

    @classmethod
    def merge(cls, reports: Sequence[DerReport]) -> DerReport:
        """Duration-weighted aggregate (component seconds are summed)."""
        if not reports:
            raise ValueError("nothing to merge")
        mapping: dict[str, dict[str, str]] = {}
        for r in reports:
            mapping.update(r.mapping)
        return cls(
            sum(r.total_ref_speech_s for r in reports),
            sum(r.fa_s for r in reports),
            sum(r.miss_s for r in reports),
            sum(r.cer_s for r in reports),
            reports[0].collar_s,
            reports[0].score_overlap,
            mapping,
        )


@dataclass
class _Timeline:
    dur: np.ndarray  # scored duration of each elementary interval
    bounds: np.ndarray
    ref: np.ndarray  # (I, n_ref) activity
    hyp: np.ndarray  # (I, n_hyp) activity
    ref_labels: list[str]
    hyp_labels: list[str]


# Times are snapped to the nanosecond so that start + dur round-off cannot
# create sliver intervals between boundaries meant to coincide.
_TIME_DECIMALS = 9


def _span(t: SpeakerTurn) -> tuple[float, float]:
    return round(t.start_s, _TIME_DECIMALS), round(t.end_s, _TIME_DECIMALS)


def _activity(turns: Sequence[SpeakerTurn], labels: list[str], bounds: np.ndarray) -> np.ndarray:
    index = {lab: j for j, lab in enumerate(labels)}
    marks = np.zeros((len(bounds), len(labels)), dtype=np.int64)
    for t in turns:
        start, end = _span(t)
        a = np.searchsorted(bounds, start)
        b = np.searchsorted(bounds, end)
        marks[a, index[t.speaker]] += 1
        marks[b, index[t.speaker]] -= 1
    return np.cumsum(marks, axis=0)[:-1] > 0


def _timeline(
    ref: Sequence[SpeakerTurn], hyp: Sequence[SpeakerTurn], collar_s: float = 0.0, score_overlap: bool = True
) -> _Timeline:
    points = [p for t in list(ref) + list(hyp) for p in _span(t)]
    edges = []
    if collar_s > 0:
        edges = sorted({p for t in ref for p in _span(t)})
        points += [max(0.0, e - collar_s) for e in edges] + [e + collar_s for e in edges]
    bounds = np.unique(np.asarray(points, dtype=np.float64))
    ref_labels = sorted({t.speaker for t in ref})
    hyp_labels = sorted({t.speaker for t in hyp})
    if len(bounds) < 2:
        empty = np.zeros((0,))
        return _Timeline(empty, bounds, np.zeros((0, len(ref_labels)), bool), np.zeros((0, len(hyp_labels)), bool), ref_labels, hyp_labels)
    R = _activity(ref, ref_labels, bounds)
    H = _activity(hyp, hyp_labels, bounds)
    dur = np.diff(bounds)
    keep = np.ones(len(dur), dtype=bool)
    if collar_s > 0:
        mids = (bounds[:-1] + bounds[1:]) / 2
        e = np.asarray(edges)
        pos = np.searchsorted(e, mids)
        near = np.full(len(mids), np.inf)
        left = pos > 0
        near[left] = mids[left] - e[pos[left] - 1]
        right = pos < len(e)
        near[right] = np.minimum(near[right], e[pos[right]] - mids[right])
        keep &= near >= collar_s
    if not score_overlap:
        keep &= R.sum(axis=1) <= 1
    return _Timeline(np.where(keep, dur, 0.0), bounds, R, H, ref_labels, hyp_labels)


def overlap_matrix(ref: Sequence[SpeakerTurn], hyp: Sequence[SpeakerTurn]) -> tuple[np.ndarray, list[str], list[str]]:
    """Seconds of simultaneous activity for every (reference, hypothesis) speaker pair.

    Returns:
        ``(matrix, ref_labels, hyp_labels)``; labels are sorted and index the
        rows and columns.
    """
    tl = _timeline(ref, hyp)
    return _overlap(tl), tl.ref_labels, tl.hyp_labels


def _overlap(tl: _Timeline) -> np.ndarray:
    return (tl.ref * tl.dur[:, None]).T.astype(np.float64) @ tl.hyp.astype(np.float64)


def _assignment_value(m: np.ndarray) -> float:
    if m.size == 0:
        return 0.0
    rows, cols = linear_sum_assignment(m, maximize=True)
    return float(m[rows, cols].sum())


def optimal_mapping(m: np.ndarray) -> dict[int, int]:
    """Row-to-column partial bijection maximising the summed entries.

    Among optimal assignments the lexicographically smallest ``(row, col)``
    choice is returned, and zero-overlap pairs are left unmapped.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    if np.any(m < 0):
        raise ValueError("overlap matrix must be non-negative")
    n_rows, n_cols = m.shape
    target = _assignment_value(m)
    tol = 1e-9 * max(1.0, target)
    free_cols = list(range(n_cols))
    mapping = {}
    for r in range(n_rows):
        later = list(range(r + 1, n_rows))
        for c in free_cols:
            if m[r, c] <= 0:
                continue
            rest = [cc for cc in free_cols if cc != c]
            value = m[r, c] + _assignment_value(m[np.ix_(later, rest)])
            if value >= target - tol:
                mapping[r] = c
                target -= m[r, c]
                free_cols = rest
                break
    return mapping


def _score_timeline(tl: _Timeline) -> tuple[float, float, float, float, dict[int, int]]:
    ov = _overlap(tl)
    pairs = optimal_mapping(ov)  # ref index -> hyp index
    n_ref = tl.ref.sum(axis=1)
    n_hyp = tl.hyp.sum(axis=1)
    correct = np.zeros(len(tl.dur))
    for r, h in pairs.items():
        correct += tl.ref[:, r] & tl.hyp[:, h]
    total = float(np.sum(tl.dur * n_ref))
    miss = float(np.sum(tl.dur * np.maximum(0, n_ref - n_hyp)))
    fa = float(np.sum(tl.dur * np.maximum(0, n_hyp - n_ref)))
    cer = float(np.sum(tl.dur * (np.minimum(n_ref, n_hyp) - correct)))
    return total, fa, miss, max(cer, 0.0), pairs


def _by_file(turns: Iterable[SpeakerTurn]) -> dict[str, list[SpeakerTurn]]:
    out: dict[str, list[SpeakerTurn]] = defaultdict(list)
    for t in turns:
        out[t.file_id].append(t)
    return out


def der(
    ref: Sequence[SpeakerTurn],
    hyp: Sequence[SpeakerTurn],
    collar_s: float = 0.0,
    score_overlap: bool = True,
) -> DerReport:
    """Score ``hyp`` against ``ref``, file by file, and aggregate by duration.

    Args:
        collar_s: half-width of the unscored zone around every reference
            boundary.
        score_overlap: when false, instants with more than one active
            reference speaker are not scored.
    """
    if collar_s < 0:
        raise ValueError("collar must be >= 0")
    refs, hyps = _by_file(ref), _by_file(hyp)
    total = fa = miss = cer = 0.0
    mapping: dict[str, dict[str, str]] = {}
    for file_id in sorted(set(refs) | set(hyps)):
        tl = _timeline(refs.get(file_id, []), hyps.get(file_id, []), collar_s, score_overlap)
        t, f, m, c, pairs = _score_timeline(tl)
        total += t
        fa += f
        miss += m
        cer += c
        mapping[file_id] = {tl.hyp_labels[h]: tl.ref_labels[r] for r, h in pairs.items()}
    if total <= 0:
        raise ValueError("no reference speech")
    return DerReport(total, fa, miss, cer, collar_s, score_overlap, mapping)


# -- error breakdown ----------------------------------------------------------


def duration_bucket(dur_s: float) -> str:
    if dur_s < 2.0:
        return "short"
    if dur_s <= 5.0:
        return "medium"
    return "long"


@dataclass
class ErrorBreakdown:
    """Percentage grid by speaker role and segment-duration bucket.

    ``percent[role][bucket]`` maps each of CER/FA/MISS/Correct to a percentage
    of that column's time, or is ``None`` for an empty column.
    ``ratio[role][bucket]`` is the bucket's share of the role's reference
    segment count.
    """

    seconds: dict[str, dict[str, dict[str, float]]]
    counts: dict[str, dict[str, int]]
    unattributed_fa_s: float = 0.0
    fa_attribution: str = FA_ATTRIBUTION

    @property
    def roles(self) -> list[str]:
        return list(self.seconds)

    @property
    def percent(self) -> dict[str, dict[str, dict[str, float] | None]]:
        out: dict[str, dict[str, dict[str, float] | None]] = {}
        for role, cols in self.seconds.items():
            out[role] = {}
            for bucket in BUCKETS:
                sec = cols[bucket]
                tot = sum(sec.values())
                out[role][bucket] = {k: 100.0 * v / tot for k, v in sec.items()} if tot > 0 else None
        return out

    @property
    def ratio(self) -> dict[str, dict[str, float]]:
        out = {}
        for role, cnt in self.counts.items():
            n = sum(cnt.values())
            out[role] = {b: (100.0 * cnt[b] / n if n else 0.0) for b in BUCKETS}
        return out

    def to_dict(self) -> dict:
        return {
            "percent": self.percent,
            "ratio": self.ratio,
            "seconds": self.seconds,
            "counts": self.counts,
            "unattributed_fa_s": self.unattributed_fa_s,
            "fa_attribution": self.fa_attribution,
        }


def _role_order(roles: Iterable[str]) -> list[str]:
    preferred = [r for r in ("student", "teacher") if r in roles]
    return preferred + sorted(set(roles) - set(preferred))


def error_breakdown(
    ref: Sequence[SpeakerTurn],
    hyp: Sequence[SpeakerTurn],
    roles: Mapping[str, str],
    collar_s: float = 0.0,
    score_overlap: bool = True,
) -> ErrorBreakdown:
    """Decompose reference time into Correct/CER/MISS and hypothesis FA per role and bucket.

    Every reference turn is bucketed by its own duration. Where several
    reference speakers are unmatched at once, confusion and miss time is
    split evenly between them; false alarms are split evenly between the
    unmatched hypothesis speakers.
    """
    missing = sorted({t.speaker for t in ref} - set(roles))
    if missing:
        raise ValueError(f"no role for reference speakers {missing}")
    role_names = _role_order(set(roles[t.speaker] for t in ref))
    seconds = {r: {b: {k: 0.0 for k in ERROR_TYPES} for b in BUCKETS} for r in role_names}
    counts = {r: {b: 0 for b in BUCKETS} for r in role_names}
    unattributed = 0.0

    refs, hyps = _by_file(ref), _by_file(hyp)
    for file_id in sorted(set(refs) | set(hyps)):
        f_ref, f_hyp = refs.get(file_id, []), hyps.get(file_id, [])
        for t in f_ref:
            counts[roles[t.speaker]][duration_bucket(t.dur_s)] += 1
        tl = _timeline(f_ref, f_hyp, collar_s, score_overlap)
        if len(tl.dur) == 0:
            continue
        pairs = optimal_mapping(_overlap(tl))
        hyp_to_ref = {h: r for r, h in pairs.items()}
        R, H = tl.ref, tl.hyp
        matched_ref = np.zeros_like(R)
        matched_hyp = np.zeros_like(H)
        for r, h in pairs.items():
            both = R[:, r] & H[:, h]
            matched_ref[:, r] = both
            matched_hyp[:, h] = both
        c = matched_ref.sum(axis=1)
        u_ref = R.sum(axis=1) - c
        u_hyp = H.sum(axis=1) - c
        with np.errstate(divide="ignore", invalid="ignore"):
            cer_frac = np.where(u_ref > 0, np.minimum(u_ref, u_hyp) / np.maximum(u_ref, 1), 0.0)
            fa_frac = np.where(u_hyp > 0, np.maximum(0, u_hyp - u_ref) / np.maximum(u_hyp, 1), 0.0)

        # A speaker's own overlapping turns must not count the same time
        # twice, so each elementary interval goes to the first turn covering it.
        ref_index = {lab: j for j, lab in enumerate(tl.ref_labels)}
        claimed = np.zeros_like(R)
        for t in f_ref:
            j = ref_index[t.speaker]
            a, b = np.searchsorted(tl.bounds, _span(t))
            d = tl.dur[a:b] * ~claimed[a:b, j]
            claimed[a:b, j] = True
            ok = matched_ref[a:b, j]
            cell = seconds[roles[t.speaker]][duration_bucket(t.dur_s)]
            cell["Correct"] += float(np.sum(d * ok))
            cell["CER"] += float(np.sum(d * ~ok * cer_frac[a:b]))
            cell["MISS"] += float(np.sum(d * ~ok * (1.0 - cer_frac[a:b])))

        hyp_index = {lab: j for j, lab in enumerate(tl.hyp_labels)}
        claimed = np.zeros_like(H)
        for t in f_hyp:
            j = hyp_index[t.speaker]
            a, b = np.searchsorted(tl.bounds, _span(t))
            d = tl.dur[a:b] * ~claimed[a:b, j]
            claimed[a:b, j] = True
            fa_time = float(np.sum(d * ~matched_hyp[a:b, j] * fa_frac[a:b]))
            if fa_time <= 0:
                continue
            r = hyp_to_ref.get(j)
            if r is None:
                unattributed += fa_time
                continue
            seconds[roles[tl.ref_labels[r]]][duration_bucket(t.dur_s)]["FA"] += fa_time
    return ErrorBreakdown(seconds, counts, unattributed)


# -- rank correlation ---------------------------------------------------------


def _fractional_ranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x))
    sorted_x = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman rank correlation (Pearson correlation of tie-averaged ranks)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D sequences of equal length")
    if len(x) < 2:
        raise ValueError("need at least two observations")
    rx = _fractional_ranks(x) - (len(x) + 1) / 2
    ry = _fractional_ranks(y) - (len(y) + 1) / 2
    den = np.sqrt(np.sum(rx * rx) * np.sum(ry * ry))
    if den == 0:
        raise ValueError("undefined correlation: constant sequence")
    return float(np.clip(np.sum(rx * ry) / den, -1.0, 1.0))
