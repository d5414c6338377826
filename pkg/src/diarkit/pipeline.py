"""End-to-end composition: fuse, decode, segment, cluster, label.

Neural outputs (frame probabilities, word timings, embeddings) come from
files; everything after them runs here.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import os
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .clustering import (
    DEFAULT_SEED,
    Embedder,
    RecordEmbedder,
    estimate_num_speakers,
    gather_embeddings,
    labels_to_turns,
    multi_scale_affinity,
    spectral_cluster,
)
from .formats import FrameTrack, SpeakerTurn, parse_ctm, parse_embeddings, parse_frame_track, parse_rttm
from .scoring import der
from .segmentation import MultiScalePlan, group_by_base_scale, plan_windows
from .vad import FusionWeight, VadThresholds, fuse, hysteresis_decode, speech_to_turns, words_to_frames


def default_seed() -> int:
    value = os.environ.get("DIARKIT_SEED")
    return int(value) if value not in (None, "") else DEFAULT_SEED


@dataclass
class RunConfig:
    frame_vad: str | None = None
    asr_ctm: str | None = None
    embeddings: str | None = None
    ref: str | None = None
    out: str | None = None
    report: str | None = None
    file_id: str | None = None

    alpha: float = 1.0
    onset: float = 0.7
    offset: float = 0.3
    min_duration_on_s: float = 0.1
    min_duration_off_s: float = 0.1
    pad_onset_s: float = 0.0
    pad_offset_s: float = 0.0

    scales: tuple[float, ...] = (1.5, 1.25, 1.0, 0.75, 0.5)
    hops: tuple[float, ...] = (0.75, 0.625, 0.5, 0.375, 0.25)
    scale_weights: tuple[float, ...] | None = None

    num_speakers: int | str = "auto"
    max_speakers: int = 8
    seed: int = field(default_factory=default_seed)
    vad_only: bool = False

    collar_s: float = 0.0
    score_overlap: bool = True

    @property
    def thresholds(self) -> VadThresholds:
        return VadThresholds(
            self.onset, self.offset, self.min_duration_on_s, self.min_duration_off_s, self.pad_onset_s, self.pad_offset_s
        )

    @property
    def plan(self) -> MultiScalePlan:
        return MultiScalePlan.from_lists(self.scales, self.hops, self.scale_weights)

    def validate(self) -> None:
        self.thresholds
        self.plan
        FusionWeight(self.alpha)
        k = self.num_speakers
        if not (k in ("auto", "oracle") or (isinstance(k, int) and k >= 1)):
            raise ValueError(f"num_speakers must be a positive integer, 'auto' or 'oracle', got {k!r}")
        if k == "oracle" and self.ref is None:
            raise ValueError("oracle speaker count needs a reference RTTM")
        for name in ("frame_vad", "asr_ctm", "embeddings", "ref"):
            path = getattr(self, name)
            if path is not None and not Path(path).is_file():
                raise FileNotFoundError(f"{name} file not found: {path}")

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        for k in ("scales", "hops", "scale_weights"):
            if d[k] is not None:
                d[k] = list(d[k])
        return d

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]

    def updated(self, **overrides) -> RunConfig:
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


# INI section -> keys; values are coerced to the dataclass field types.
CONFIG_SECTIONS = {
    "io": ("frame_vad", "asr_ctm", "embeddings", "ref", "out", "report", "file_id"),
    "fusion": ("alpha",),
    "vad": ("onset", "offset", "min_duration_on_s", "min_duration_off_s", "pad_onset_s", "pad_offset_s"),
    "segmentation": ("scales", "hops", "scale_weights"),
    "clustering": ("num_speakers", "max_speakers", "seed", "vad_only"),
    "scoring": ("collar_s", "score_overlap"),
}


def _coerce(name: str, raw: str):
    if name in ("scales", "hops", "scale_weights"):
        return tuple(float(v) for v in raw.replace(",", " ").split())
    if name == "num_speakers":
        return raw.strip() if raw.strip() in ("auto", "oracle") else int(raw)
    if name in ("max_speakers", "seed"):
        return int(raw)
    if name in ("vad_only", "score_overlap"):
        return raw.strip().lower() in ("1", "true", "yes", "on")
    if name in CONFIG_SECTIONS["io"]:
        return raw.strip()
    return float(raw)


def load_config(text: str, base: RunConfig | None = None) -> RunConfig:
    """Read an INI-style run config; unknown sections or keys are errors."""
    parser = configparser.ConfigParser()
    parser.read_string(text)
    values = {}
    for section in parser.sections():
        if section not in CONFIG_SECTIONS:
            raise ValueError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in CONFIG_SECTIONS[section]:
                raise ValueError(f"unknown key {key!r} in section [{section}]")
            values[key] = _coerce(key, raw)
    return replace(base or RunConfig(), **values)


def dump_config(cfg: RunConfig) -> str:
    parser = configparser.ConfigParser()
    d = cfg.to_dict()
    for section, keys in CONFIG_SECTIONS.items():
        parser[section] = {}
        for k in keys:
            v = d[k]
            if v is None:
                continue
            parser[section][k] = " ".join(str(x) for x in v) if isinstance(v, list) else str(v)
    from io import StringIO

    buf = StringIO()
    parser.write(buf)
    return buf.getvalue()


@dataclass
class DiarizationResult:
    turns: list[SpeakerTurn]
    report: dict[str, Any]


def diarize_tracks(
    frame_vad: FrameTrack,
    cfg: RunConfig,
    asr: FrameTrack | None = None,
    embedder: Embedder | None = None,
    file_id: str = "file",
    oracle_k: int | None = None,
) -> DiarizationResult:
    """Run the post-neural pipeline on in-memory inputs.

    Args:
        frame_vad: frame-level speech probabilities.
        cfg: stage parameters; I/O fields are ignored.
        asr: optional binary ASR track fused with weight ``1 - cfg.alpha``.
        embedder: source of embeddings for planned windows; required unless
            ``cfg.vad_only``.
        oracle_k: speaker count used when ``cfg.num_speakers == "oracle"``.
    """
    timings: dict[str, float] = {}
    tick = time.perf_counter()

    def lap(name):
        nonlocal tick
        now = time.perf_counter()
        timings[name] = round(now - tick, 6)
        tick = now

    track = frame_vad
    if asr is not None:
        track = fuse(frame_vad, asr, FusionWeight(cfg.alpha))
    lap("fuse")
    speech = hysteresis_decode(track, cfg.thresholds)
    lap("decode")
    counts: dict[str, Any] = {"frames": len(track), "speech_segments": len(speech)}

    if cfg.vad_only:
        turns = speech_to_turns(speech, file_id)
        counts["speakers"] = 1 if turns else 0
        return DiarizationResult(turns, _report(cfg, timings, counts, k=None, method="vad_only"))

    if embedder is None:
        raise ValueError("clustering requested but no embeddings were given; use --vad-only for speech detection only")
    plan = cfg.plan
    windows = plan_windows(speech, plan)
    lap("segment")
    counts["windows_per_scale"] = [len(w) for w in windows]
    base = windows[-1]
    if not base:
        counts["speakers"] = 0
        return DiarizationResult([], _report(cfg, timings, counts, k=0, method="none"))

    groups = group_by_base_scale(windows, speech)
    emb = gather_embeddings(embedder, windows)
    aff = multi_scale_affinity(emb, groups, plan.weights)
    lap("affinity")
    n = len(base)
    if cfg.num_speakers == "auto":
        k, method = estimate_num_speakers(aff, cfg.max_speakers), "eigen_gap"
    elif cfg.num_speakers == "oracle":
        if oracle_k is None:
            raise ValueError("oracle speaker count requested but not provided")
        k, method = int(oracle_k), "oracle"
    else:
        k, method = int(cfg.num_speakers), "oracle"
    k = max(1, min(k, n))
    result = spectral_cluster(aff, k, seed=cfg.seed, method=method)
    lap("cluster")
    turns = labels_to_turns(base, result.labels, file_id)
    counts["speakers"] = int(len(np.unique(result.labels)))
    counts["turns"] = len(turns)
    return DiarizationResult(turns, _report(cfg, timings, counts, k=k, method=method))


def _report(cfg: RunConfig, timings, counts, k, method) -> dict[str, Any]:
    return {
        "config": cfg.to_dict(),
        "config_hash": cfg.digest(),
        "seed": cfg.seed,
        "cluster": {"k": k, "method": method},
        "counts": counts,
        "timings_s": timings,
    }


def diarize(cfg: RunConfig) -> DiarizationResult:
    """File-level pipeline driven entirely by ``cfg``."""
    if cfg.frame_vad is None:
        raise ValueError("a frame-VAD track is required")
    cfg.validate()
    frame_vad = parse_frame_track(Path(cfg.frame_vad).read_text())
    file_id = cfg.file_id or Path(cfg.frame_vad).stem
    asr = None
    if cfg.asr_ctm:
        words = parse_ctm(Path(cfg.asr_ctm).read_text())
        asr = words_to_frames(words, frame_vad.frame_ms, len(frame_vad))
    embedder = None
    if cfg.embeddings:
        embedder = RecordEmbedder(parse_embeddings(Path(cfg.embeddings).read_text()))
    elif not cfg.vad_only:
        raise ValueError("clustering requested but no embeddings file was given; use --vad-only for speech detection only")
    ref = None
    if cfg.ref:
        ref = [t for t in parse_rttm(Path(cfg.ref).read_text()) if t.file_id == file_id]
    oracle_k = len({t.speaker for t in ref}) if ref else None
    result = diarize_tracks(frame_vad, cfg, asr=asr, embedder=embedder, file_id=file_id, oracle_k=oracle_k)
    if ref is not None:
        result.report["der"] = der(ref, result.turns, cfg.collar_s, cfg.score_overlap).to_dict()
    return result


def render_report(report: Mapping[str, Any]) -> str:
    """Plain-text DER table (percentages, one decimal) plus optional breakdown."""
    block = report.get("der", report)
    if not isinstance(block, Mapping):
        block = report
    try:
        values = [float(block[k]) * 100.0 for k in ("der", "fa_rate", "miss_rate", "cer_rate")]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed report: {exc}") from None
    lines = [
        f"{'DER':>6} | {'FA':>6} | {'MISS':>6} | {'CER':>6}",
        "-" * 6 + "-+-" + "-" * 6 + "-+-" + "-" * 6 + "-+-" + "-" * 6,
        " | ".join(f"{v:6.1f}" for v in values),
    ]
    breakdown = report.get("breakdown")
    if breakdown:
        lines += ["", _render_breakdown(breakdown)]
    return "\n".join(lines) + "\n"


def _render_breakdown(bd: Mapping[str, Any]) -> str:
    percent, ratio = bd["percent"], bd["ratio"]
    roles = list(percent)
    buckets = ("long", "medium", "short")
    cols = [(r, b) for r in roles for b in buckets]
    head = f"{'Type':<8}" + "".join(f"{(r[:7] + '/' + b[0].upper()):>11}" for r, b in cols)
    rows = [head]
    for kind in ("CER", "FA", "MISS", "Correct"):
        cells = []
        for r, b in cols:
            col = percent[r][b]
            cells.append(f"{col[kind]:11.1f}" if col else f"{'-':>11}")
        rows.append(f"{kind:<8}" + "".join(cells))
    rows.append(f"{'Ratio':<8}" + "".join(f"{ratio[r][b]:11.1f}" for r, b in cols))
    return "\n".join(rows)
