"""``diarkit`` command-line entry point."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import formats
from .clustering import (
    RecordEmbedder,
    estimate_num_speakers,
    gather_embeddings,
    labels_to_turns,
    multi_scale_affinity,
    spectral_cluster,
)
from .denoise import SpectralGateConfig, make_augmentation_manifest
from .pipeline import RunConfig, default_seed, diarize, load_config, render_report
from .scoring import der, error_breakdown, spearman
from .segmentation import MultiScalePlan, group_by_base_scale, plan_windows
from .tuning import DevItem, GridSpec, grid_search, parse_range, write_trials_csv
from .vad import FusionWeight, VadThresholds, fuse, hysteresis_decode, speech_to_turns, turns_to_speech, words_to_frames


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(","))


def _speakers(text: str):
    return text if text in ("auto", "oracle") else int(text)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_denoise(args) -> int:
    cfg = SpectralGateConfig(
        fft_size=args.fft, hop=args.hop, n_std_thresh=args.n_std, prop_decrease=args.prop_decrease
    )
    rows = make_augmentation_manifest(args.inputs, args.out_dir, cfg, workers=args.workers)
    print(f"denoised {len(rows)} files; manifest at {Path(args.out_dir) / 'manifest.tsv'}")
    return 0


def cmd_vad_fuse(args) -> int:
    frame_vad = formats.parse_frame_track(Path(args.frame_vad).read_text())
    words = formats.parse_ctm(Path(args.asr_ctm).read_text())
    asr = words_to_frames(words, frame_vad.frame_ms, len(frame_vad))
    fused = fuse(frame_vad, asr, FusionWeight(args.alpha))
    _emit(formats.write_frame_track(fused), args.out)
    return 0


def cmd_vad_decode(args) -> int:
    track = formats.parse_frame_track(Path(args.track).read_text())
    th = VadThresholds(args.onset, args.offset, args.min_on, args.min_off, args.pad_onset, args.pad_offset)
    segs = hysteresis_decode(track, th)
    file_id = args.file_id or Path(args.track).stem
    _emit(formats.write_rttm(speech_to_turns(segs, file_id)), args.out)
    return 0


def cmd_segment(args) -> int:
    speech = turns_to_speech(formats.parse_rttm(Path(args.speech).read_text()))
    plan = MultiScalePlan.from_lists(args.scales, args.hops)
    _emit(formats.write_windows(plan_windows(speech, plan)), args.out)
    return 0


def cmd_cluster(args) -> int:
    windows = formats.parse_windows(Path(args.windows).read_text())
    if not windows or not windows[-1]:
        _emit("", args.out)
        return 0
    records = formats.parse_embeddings(Path(args.embeddings).read_text())
    speech = turns_to_speech(formats.parse_rttm(Path(args.speech).read_text())) if args.speech else None
    weights = args.weights or tuple([1.0 / len(windows)] * len(windows))
    groups = group_by_base_scale(windows, speech)
    aff = multi_scale_affinity(gather_embeddings(RecordEmbedder(records), windows), groups, weights)
    if args.num_speakers == "auto":
        k, method = estimate_num_speakers(aff, args.max_speakers), "eigen_gap"
    else:
        k, method = int(args.num_speakers), "oracle"
    result = spectral_cluster(aff, min(k, len(aff)), seed=args.seed, method=method)
    file_id = args.file_id or Path(args.windows).stem
    _emit(formats.write_rttm(labels_to_turns(windows[-1], result.labels, file_id)), args.out)
    return 0


def _run_config(args) -> RunConfig:
    cfg = load_config(Path(args.config).read_text()) if args.config else RunConfig()
    overrides = {
        "frame_vad": args.frame_vad,
        "asr_ctm": args.asr_ctm,
        "embeddings": args.embeddings,
        "ref": args.ref,
        "out": args.out,
        "report": args.report,
        "file_id": args.file_id,
        "alpha": args.alpha,
        "onset": args.onset,
        "offset": args.offset,
        "num_speakers": args.num_speakers,
        "seed": args.seed,
        "collar_s": args.collar,
    }
    cfg = cfg.updated(**overrides)
    if args.vad_only:
        cfg = replace(cfg, vad_only=True)
    if args.scales:
        cfg = replace(cfg, scales=args.scales, hops=args.hops or tuple(w / 2 for w in args.scales))
    return cfg


def cmd_diarize(args) -> int:
    cfg = _run_config(args)
    result = diarize(cfg)
    _emit(formats.write_rttm(result.turns), cfg.out)
    report = json.dumps(result.report, indent=2, sort_keys=True) + "\n"
    if cfg.report:
        Path(cfg.report).write_text(report)
    elif cfg.out:
        sys.stdout.write(report)
    return 0


def cmd_score(args) -> int:
    ref = formats.parse_rttm(Path(args.ref).read_text())
    hyp = formats.parse_rttm(Path(args.hyp).read_text())
    rep = der(ref, hyp, args.collar, not args.no_overlap)
    payload = {"der": rep.to_dict()}
    if args.breakdown:
        if not args.roles:
            raise ValueError("--breakdown needs --roles")
        roles = formats.parse_roles(Path(args.roles).read_text())
        payload["breakdown"] = error_breakdown(ref, hyp, roles, args.collar, not args.no_overlap).to_dict()
    if args.json:
        Path(args.json).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    sys.stdout.write(render_report(payload))
    return 0


def cmd_analyze(args) -> int:
    if args.correlate:
        with open(args.correlate, newline="") as fh:
            rows = list(csv.DictReader(fh))
        d = [float(r["der"]) for r in rows]
        vad = [float(r["fa"]) + float(r["miss"]) for r in rows]
        cer = [float(r["cer"]) for r in rows]
        print(f"spearman(DER, FA+MISS) = {spearman(d, vad):.3f}")
        print(f"spearman(DER, CER)     = {spearman(d, cer):.3f}")
        return 0
    if not (args.ref and args.hyp and args.roles):
        raise ValueError("analyze needs --ref, --hyp and --roles (or --correlate)")
    ref = formats.parse_rttm(Path(args.ref).read_text())
    hyp = formats.parse_rttm(Path(args.hyp).read_text())
    roles = formats.parse_roles(Path(args.roles).read_text())
    bd = error_breakdown(ref, hyp, roles)
    payload = {"der": der(ref, hyp).to_dict(), "breakdown": bd.to_dict()}
    if args.json:
        Path(args.json).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    sys.stdout.write(render_report(payload))
    return 0


def _read_dev_manifest(path: str, no_asr: bool) -> list[DevItem]:
    """Rows: ``file_id frame_vad asr_ctm ref_rttm embeddings`` (``-`` for none)."""
    base = Path(path).parent

    def resolve(p):
        return None if p == "-" else (base / p if not Path(p).is_absolute() else Path(p))

    items = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        fields = line.split()
        if not fields or fields[0].startswith("#") or fields[0] == "file_id":
            continue
        if len(fields) != 5:
            raise formats.FormatError("expected 5 columns: file_id frame_vad asr_ctm ref embeddings", lineno)
        file_id, fv, ctm, ref, emb = fields
        track = formats.parse_frame_track(resolve(fv).read_text())
        asr = None
        if resolve(ctm) is not None and not no_asr:
            asr = words_to_frames(formats.parse_ctm(resolve(ctm).read_text()), track.frame_ms, len(track))
        ref_turns = [t for t in formats.parse_rttm(resolve(ref).read_text()) if t.file_id == file_id]
        embedder = None
        if resolve(emb) is not None:
            embedder = RecordEmbedder(formats.parse_embeddings(resolve(emb).read_text()))
        items.append(DevItem(file_id, track, ref_turns, asr, embedder))
    return items


def cmd_tune(args) -> int:
    dev = _read_dev_manifest(args.manifest, args.no_asr)
    alpha = (1.0,) if args.no_asr else parse_range(args.alpha)
    grid = GridSpec(parse_range(args.onset), parse_range(args.offset), alpha)
    base = RunConfig(seed=args.seed)
    result = grid_search(dev, grid, k_mode=args.num_speakers, base=base, workers=args.workers)
    _emit(write_trials_csv(result.ranking), args.out)
    summary = result.summary()
    print(
        f"evaluated {summary['evaluated']} triples "
        f"(skipped {summary['infeasible_skipped']} with offset > onset), "
        f"{summary['failed']} failed",
        file=sys.stderr,
    )
    for f in result.failed:
        print(f"failed: onset={f.onset} offset={f.offset} alpha={f.alpha} {f.file_id}: {f.cause}", file=sys.stderr)
    if result.ranking:
        b = result.best
        print(f"best: onset={b.onset:g} offset={b.offset:g} alpha={b.alpha:g} DER={100 * b.mean_der:.1f}%", file=sys.stderr)
    return 0


def cmd_report(args) -> int:
    try:
        payload = json.loads(Path(args.report).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"malformed report: {exc}") from None
    if args.json:
        sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write(render_report(payload))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="diarkit", description="Speaker diarization toolkit (post-neural stages).")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("denoise", help="spectral-gate WAV files and write an augmentation manifest")
    d.add_argument("--in", dest="inputs", nargs="+", required=True)
    d.add_argument("--out-dir", required=True)
    d.add_argument("--n-std", type=float, default=1.5)
    d.add_argument("--prop-decrease", type=float, default=1.0)
    d.add_argument("--fft", type=int, default=1024)
    d.add_argument("--hop", type=int, default=256)
    d.add_argument("--workers", type=int, default=1)
    d.set_defaults(func=cmd_denoise)

    v = sub.add_parser("vad", help="fuse or decode frame tracks")
    vsub = v.add_subparsers(dest="vad_command", required=True)
    vf = vsub.add_parser("fuse")
    vf.add_argument("--frame-vad", required=True)
    vf.add_argument("--asr-ctm", required=True)
    vf.add_argument("--alpha", type=float, required=True)
    vf.add_argument("--out")
    vf.set_defaults(func=cmd_vad_fuse)
    vd = vsub.add_parser("decode")
    vd.add_argument("--track", required=True)
    vd.add_argument("--onset", type=float, default=0.7)
    vd.add_argument("--offset", type=float, default=0.3)
    vd.add_argument("--min-on", type=float, default=0.1)
    vd.add_argument("--min-off", type=float, default=0.1)
    vd.add_argument("--pad-onset", type=float, default=0.0)
    vd.add_argument("--pad-offset", type=float, default=0.0)
    vd.add_argument("--file-id")
    vd.add_argument("--out")
    vd.set_defaults(func=cmd_vad_decode)

    s = sub.add_parser("segment", help="plan multi-scale embedding windows")
    s.add_argument("--speech", required=True)
    s.add_argument("--scales", type=_floats, default=(1.5, 1.25, 1.0, 0.75, 0.5))
    s.add_argument("--hops", type=_floats, default=(0.75, 0.625, 0.5, 0.375, 0.25))
    s.add_argument("--out")
    s.set_defaults(func=cmd_segment)

    c = sub.add_parser("cluster", help="spectral clustering of window embeddings")
    c.add_argument("--embeddings", required=True)
    c.add_argument("--windows", required=True)
    c.add_argument("--speech", help="speech RTTM; restricts cross-scale grouping to the same segment")
    c.add_argument("--num-speakers", type=_speakers, default="auto")
    c.add_argument("--max-speakers", type=int, default=8)
    c.add_argument("--weights", type=_floats)
    c.add_argument("--seed", type=int, default=default_seed())
    c.add_argument("--file-id")
    c.add_argument("--out")
    c.set_defaults(func=cmd_cluster)

    z = sub.add_parser("diarize", help="end-to-end pipeline")
    z.add_argument("--config", help="INI run config; flags override its values")
    z.add_argument("--frame-vad")
    z.add_argument("--asr-ctm")
    z.add_argument("--embeddings")
    z.add_argument("--ref", help="reference RTTM; adds a DER block to the report")
    z.add_argument("--file-id")
    z.add_argument("--alpha", type=float)
    z.add_argument("--onset", type=float)
    z.add_argument("--offset", type=float)
    z.add_argument("--scales", type=_floats)
    z.add_argument("--hops", type=_floats)
    z.add_argument("--num-speakers", type=_speakers)
    z.add_argument("--seed", type=int)
    z.add_argument("--collar", type=float)
    z.add_argument("--vad-only", action="store_true")
    z.add_argument("--out")
    z.add_argument("--report")
    z.set_defaults(func=cmd_diarize)

    sc = sub.add_parser("score", help="DER against a reference RTTM")
    sc.add_argument("--ref", required=True)
    sc.add_argument("--hyp", required=True)
    sc.add_argument("--collar", type=float, default=0.0)
    sc.add_argument("--no-overlap", action="store_true")
    sc.add_argument("--roles")
    sc.add_argument("--breakdown", action="store_true")
    sc.add_argument("--json")
    sc.set_defaults(func=cmd_score)

    a = sub.add_parser("analyze", help="role/duration error breakdown or rank correlation")
    a.add_argument("--ref")
    a.add_argument("--hyp")
    a.add_argument("--roles")
    a.add_argument("--json")
    a.add_argument("--correlate", help="trials CSV; prints Spearman rho of DER vs FA+MISS and vs CER")
    a.set_defaults(func=cmd_analyze)

    t = sub.add_parser("tune", help="grid search over onset, offset and alpha")
    t.add_argument("--manifest", required=True)
    t.add_argument("--onset", default="0.3:0.9:0.05")
    t.add_argument("--offset", default="0.1:0.8:0.05")
    t.add_argument("--alpha", default="0.0:1.0:0.05")
    t.add_argument("--no-asr", action="store_true")
    t.add_argument("--num-speakers", type=_speakers, default="oracle")
    t.add_argument("--seed", type=int, default=default_seed())
    t.add_argument("--workers", type=int, default=1)
    t.add_argument("--out")
    t.set_defaults(func=cmd_tune)

    r = sub.add_parser("report", help="render a JSON run or score report")
    r.add_argument("report")
    r.add_argument("--json", action="store_true", help="print the raw JSON instead")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"diarkit: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
