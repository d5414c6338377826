"""Readers and writers for the text formats exchanged between pipeline stages.

Supported formats:

- RTTM speaker turns (``SPEAKER file chan start dur <NA> <NA> spk <NA> <NA>``)
- CTM word alignments (``file chan start dur token [conf]``)
- frame tracks (optional ``#frame_ms=<int>`` / ``#origin=<name>`` headers,
  then one probability per line)
- embedding records (one JSON object per line with ``scale``, ``start``,
  ``end`` and ``vec``)
- role maps (``speaker role`` per line)
- window plans (``scale start end`` per line)
- augmentation manifests (``original denoised`` per line)

All parsers take a string and raise :class:`FormatError` carrying the 1-based
line number of the first offending line.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

DEFAULT_FRAME_MS = 20
TRACK_ORIGINS = ("frame_vad", "asr", "fused", "reference")


class FormatError(ValueError):
    """Raised when a text record cannot be parsed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True, order=True)
class SpeakerTurn:
    file_id: str
    channel: int
    start_s: float
    dur_s: float
    speaker: str

    def __post_init__(self):
        if not self.dur_s > 0:
            raise ValueError(f"turn duration must be positive, got {self.dur_s}")
        if self.start_s < 0:
            raise ValueError(f"turn start must be non-negative, got {self.start_s}")
        if not self.speaker:
            raise ValueError("turn speaker label must be non-empty")
        if self.channel < 1:
            raise ValueError(f"channel must be >= 1, got {self.channel}")

    @property
    def end_s(self) -> float:
        return self.start_s + self.dur_s


@dataclass(frozen=True)
class Word:
    token: str
    start_s: float
    end_s: float

    def __post_init__(self):
        if not self.end_s > self.start_s:
            raise ValueError(f"word {self.token!r} has end {self.end_s} <= start {self.start_s}")


@dataclass(eq=False)
class FrameTrack:
    """Per-frame speech probabilities on a fixed frame grid."""

    probs: np.ndarray
    frame_ms: int = DEFAULT_FRAME_MS
    origin: str = "frame_vad"

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64).reshape(-1)
        if int(self.frame_ms) != self.frame_ms or self.frame_ms <= 0:
            raise ValueError(f"frame_ms must be a positive integer, got {self.frame_ms}")
        self.frame_ms = int(self.frame_ms)
        if self.origin not in TRACK_ORIGINS:
            raise ValueError(f"unknown track origin {self.origin!r}")
        if self.probs.size and not (
            np.all(np.isfinite(self.probs)) and self.probs.min() >= 0.0 and self.probs.max() <= 1.0
        ):
            raise ValueError("frame probabilities must lie in [0, 1]")

    def __len__(self) -> int:
        return self.probs.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, FrameTrack):
            return NotImplemented
        return (
            self.frame_ms == other.frame_ms
            and self.origin == other.origin
            and np.array_equal(self.probs, other.probs)
        )

    @property
    def frame_s(self) -> float:
        return self.frame_ms / 1000.0

    @property
    def duration_s(self) -> float:
        return len(self) * self.frame_ms / 1000.0


@dataclass(eq=False)
class EmbeddingRecord:
    scale_index: int
    start_s: float
    end_s: float
    vec: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.vec = np.asarray(self.vec, dtype=np.float64).reshape(-1)
        if self.scale_index < 0:
            raise ValueError(f"scale index must be >= 0, got {self.scale_index}")
        if not self.end_s > self.start_s:
            raise ValueError(f"embedding window end {self.end_s} <= start {self.start_s}")

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingRecord):
            return NotImplemented
        return (
            self.scale_index == other.scale_index
            and self.start_s == other.start_s
            and self.end_s == other.end_s
            and np.array_equal(self.vec, other.vec)
        )


def _lines(text: str) -> Iterator[tuple[int, str]]:
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(";;") or line.startswith("#"):
            continue
        yield lineno, line


def _float(value: str, what: str, lineno: int) -> float:
    try:
        out = float(value)
    except ValueError:
        raise FormatError(f"{what} {value!r} is not a number", lineno) from None
    if not math.isfinite(out):
        raise FormatError(f"{what} {value!r} is not finite", lineno)
    return out


# -- RTTM ---------------------------------------------------------------------


def parse_rttm(text: str) -> list[SpeakerTurn]:
    """Parse RTTM ``SPEAKER`` records, preserving line order.

    Lines of other record types (``SPKR-INFO``, ``LEXEME``...) are skipped.
    """
    turns = []
    for lineno, line in _lines(text):
        fields = line.split()
        if len(fields) < 9:
            raise FormatError(f"expected at least 9 fields, got {len(fields)}", lineno)
        if fields[0] != "SPEAKER":
            continue
        try:
            channel = int(fields[2])
        except ValueError:
            raise FormatError(f"channel {fields[2]!r} is not an integer", lineno) from None
        start = _float(fields[3], "start", lineno)
        dur = _float(fields[4], "duration", lineno)
        if dur <= 0:
            raise FormatError(f"duration must be positive, got {fields[4]}", lineno)
        try:
            turns.append(SpeakerTurn(fields[1], channel, start, dur, fields[7]))
        except ValueError as exc:
            raise FormatError(str(exc), lineno) from None
    return turns


def write_rttm(turns: Iterable[SpeakerTurn]) -> str:
    ordered = sorted(turns, key=lambda t: (t.file_id, t.start_s, t.speaker))
    return "".join(
        f"SPEAKER {t.file_id} {t.channel} {t.start_s:.3f} {t.dur_s:.3f} <NA> <NA> {t.speaker} <NA> <NA>\n"
        for t in ordered
    )


# -- CTM ----------------------------------------------------------------------


def parse_ctm(text: str) -> list[Word]:
    words = []
    for lineno, line in _lines(text):
        fields = line.split()
        if len(fields) < 5:
            raise FormatError(f"expected at least 5 fields, got {len(fields)}", lineno)
        start = _float(fields[2], "start", lineno)
        dur = _float(fields[3], "duration", lineno)
        if dur <= 0:
            raise FormatError(f"duration must be positive, got {fields[3]}", lineno)
        words.append(Word(fields[4], start, start + dur))
    return words


def write_ctm(words: Iterable[Word], file_id: str = "file", channel: int = 1) -> str:
    return "".join(
        f"{file_id} {channel} {w.start_s:.3f} {w.end_s - w.start_s:.3f} {w.token}\n" for w in words
    )


# -- frame tracks -------------------------------------------------------------


def parse_frame_track(text: str) -> FrameTrack:
    frame_ms = DEFAULT_FRAME_MS
    origin = "frame_vad"
    probs = []
    for lineno, raw in enumerate(text.rstrip().splitlines(), start=1):
        line = raw.strip()
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            key = key.strip()
            if key == "frame_ms":
                try:
                    frame_ms = int(value)
                except ValueError:
                    raise FormatError(f"bad frame_ms header {value!r}", lineno) from None
                if frame_ms <= 0:
                    raise FormatError("frame_ms must be positive", lineno)
            elif key == "origin":
                origin = value.strip()
                if origin not in TRACK_ORIGINS:
                    raise FormatError(f"unknown origin {origin!r}", lineno)
            continue
        if not line:
            raise FormatError("missing probability value", lineno)
        p = _float(line, "probability", lineno)
        if not 0.0 <= p <= 1.0:
            raise FormatError(f"probability {line} outside [0, 1]", lineno)
        probs.append(p)
    return FrameTrack(np.array(probs, dtype=np.float64), frame_ms=frame_ms, origin=origin)


def write_frame_track(track: FrameTrack) -> str:
    head = f"#frame_ms={track.frame_ms}\n#origin={track.origin}\n"
    return head + "".join(f"{float(p)!r}\n" for p in track.probs)


# -- embeddings ---------------------------------------------------------------


def parse_embeddings(text: str) -> list[EmbeddingRecord]:
    records = []
    dims: dict[int, tuple[int, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON ({exc.msg})", lineno) from None
        if not isinstance(obj, dict):
            raise FormatError("record must be a JSON object", lineno)
        missing = [k for k in ("scale", "start", "end", "vec") if k not in obj]
        if missing:
            raise FormatError(f"record missing keys {missing}", lineno)
        try:
            rec = EmbeddingRecord(int(obj["scale"]), float(obj["start"]), float(obj["end"]), obj["vec"])
        except (TypeError, ValueError) as exc:
            raise FormatError(str(exc), lineno) from None
        if rec.vec.size == 0 or not np.all(np.isfinite(rec.vec)):
            raise FormatError("embedding vector must be non-empty and finite", lineno)
        dim = rec.vec.size
        if rec.scale_index in dims and dims[rec.scale_index][0] != dim:
            first_dim, first_line = dims[rec.scale_index]
            raise FormatError(
                f"scale {rec.scale_index} vector has dimension {dim}, "
                f"but line {first_line} has dimension {first_dim}",
                lineno,
            )
        dims.setdefault(rec.scale_index, (dim, lineno))
        records.append(rec)
    return records


def write_embeddings(records: Iterable[EmbeddingRecord]) -> str:
    return "".join(
        json.dumps(
            {"scale": r.scale_index, "start": r.start_s, "end": r.end_s, "vec": r.vec.tolist()}
        )
        + "\n"
        for r in records
    )


# -- role maps, window plans, manifests --------------------------------------


def parse_roles(text: str) -> dict[str, str]:
    roles = {}
    for lineno, line in _lines(text):
        fields = line.split()
        if len(fields) != 2:
            raise FormatError(f"expected 'speaker role', got {len(fields)} fields", lineno)
        roles[fields[0]] = fields[1]
    return roles


def write_roles(roles: dict[str, str]) -> str:
    return "".join(f"{spk} {role}\n" for spk, role in sorted(roles.items()))


def parse_windows(text: str) -> list[list[tuple[float, float]]]:
    """Parse a per-scale window list written by :func:`write_windows`."""
    per_scale: dict[int, list[tuple[float, float]]] = {}
    for lineno, line in _lines(text):
        fields = line.split()
        if len(fields) != 3:
            raise FormatError(f"expected 'scale start end', got {len(fields)} fields", lineno)
        try:
            scale = int(fields[0])
        except ValueError:
            raise FormatError(f"scale {fields[0]!r} is not an integer", lineno) from None
        if scale < 0:
            raise FormatError("scale index must be >= 0", lineno)
        start = _float(fields[1], "start", lineno)
        end = _float(fields[2], "end", lineno)
        if end <= start:
            raise FormatError("window end must exceed start", lineno)
        per_scale.setdefault(scale, []).append((start, end))
    n_scales = max(per_scale) + 1 if per_scale else 0
    return [per_scale.get(s, []) for s in range(n_scales)]


def write_windows(windows: Sequence[Sequence[tuple[float, float]]]) -> str:
    return "".join(
        f"{s} {start:.3f} {end:.3f}\n" for s, scale in enumerate(windows) for start, end in scale
    )


def parse_manifest(text: str) -> list[tuple[str, str]]:
    rows = []
    for lineno, line in _lines(text):
        fields = line.split("\t") if "\t" in line else line.split()
        if len(fields) != 2:
            raise FormatError("expected 'original denoised'", lineno)
        rows.append((fields[0], fields[1]))
    return rows


def write_manifest(rows: Iterable[tuple[str, str]]) -> str:
    return "".join(f"{orig}\t{den}\n" for orig, den in rows)
