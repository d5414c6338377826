import json

import numpy as np
import pytest
from oracles import (
    PLANTED_SEGMENTS,
    planted_embedder,
    planted_records,
    planted_reference,
    planted_track,
    tuning_fixture,
)

from diarkit.audio import AudioBuffer, write_wav
from diarkit.cli import main
from diarkit.formats import (
    Word,
    parse_frame_track,
    parse_rttm,
    parse_windows,
    write_ctm,
    write_embeddings,
    write_frame_track,
    write_roles,
    write_rttm,
)
from diarkit.pipeline import RunConfig, diarize, diarize_tracks, dump_config, load_config, render_report


@pytest.fixture
def planted(tmp_path):
    paths = {
        "track": tmp_path / "planted.track",
        "ref": tmp_path / "planted.rttm",
        "emb": tmp_path / "planted.jsonl",
    }
    paths["track"].write_text(write_frame_track(planted_track()))
    paths["ref"].write_text(write_rttm(planted_reference()))
    paths["emb"].write_text(write_embeddings(planted_records()))
    return paths


def _diarize_args(p, out, *extra):
    return [
        "diarize",
        "--frame-vad", str(p["track"]),
        "--embeddings", str(p["emb"]),
        "--ref", str(p["ref"]),
        "--out", str(out),
        "--report", str(out) + ".json",
        *extra,
    ]  # fmt: skip


def test_diarize_is_byte_identical_and_exact(planted, tmp_path):
    outs = []
    for i in range(3):
        out = tmp_path / f"hyp{i}.rttm"
        assert main(_diarize_args(planted, out)) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] == outs[2]
    report = json.loads((tmp_path / "hyp0.rttm.json").read_text())
    assert report["der"]["der"] == 0.0
    assert report["cluster"] == {"k": 2, "method": "eigen_gap"}
    assert report["seed"] == 42 and len(report["config_hash"]) == 16
    assert set(report["timings_s"]) >= {"fuse", "decode", "segment", "affinity", "cluster"}
    assert report["counts"]["speech_segments"] == len(PLANTED_SEGMENTS)


def test_diarize_in_memory_matches_planted_reference():
    res = diarize_tracks(planted_track(), RunConfig(num_speakers=2), embedder=planted_embedder(), file_id="planted")
    assert len(res.turns) == len(PLANTED_SEGMENTS)
    assert {t.speaker for t in res.turns} == {"speaker_0", "speaker_1"}


def test_vad_only(planted, tmp_path):
    out = tmp_path / "speech.rttm"
    assert main(["diarize", "--frame-vad", str(planted["track"]), "--vad-only", "--out", str(out),
                 "--report", str(tmp_path / "r.json")]) == 0  # fmt: skip
    turns = parse_rttm(out.read_text())
    assert {t.speaker for t in turns} == {"speech"}
    assert len(turns) == len(PLANTED_SEGMENTS)


def test_oracle_speaker_count(planted, tmp_path):
    out = tmp_path / "hyp.rttm"
    assert main(_diarize_args(planted, out, "--num-speakers", "2")) == 0
    assert len({t.speaker for t in parse_rttm(out.read_text())}) == 2
    assert main(_diarize_args(planted, out, "--num-speakers", "oracle")) == 0
    assert json.loads((tmp_path / "hyp.rttm.json").read_text())["cluster"]["method"] == "oracle"


def test_missing_embeddings_points_to_vad_only(planted, tmp_path, capsys):
    assert main(["diarize", "--frame-vad", str(planted["track"]), "--out", str(tmp_path / "x.rttm")]) == 1
    assert "--vad-only" in capsys.readouterr().err


def test_missing_input_file_fails(tmp_path, capsys):
    assert main(["diarize", "--frame-vad", str(tmp_path / "nope.track"), "--vad-only"]) == 1
    assert "not found" in capsys.readouterr().err


def test_seed_env_var(planted, tmp_path, monkeypatch):
    monkeypatch.setenv("DIARKIT_SEED", "7")
    out = tmp_path / "hyp.rttm"
    assert main(_diarize_args(planted, out)) == 0
    assert json.loads((tmp_path / "hyp.rttm.json").read_text())["seed"] == 7


def test_config_file_and_flag_override(planted, tmp_path):
    cfg_path = tmp_path / "run.ini"
    cfg_path.write_text(
        f"[io]\nframe_vad = {planted['track']}\nembeddings = {planted['emb']}\n"
        "[vad]\nonset = 0.6\n[clustering]\nnum_speakers = 3\n"
    )
    out = tmp_path / "hyp.rttm"
    assert main(["diarize", "--config", str(cfg_path), "--num-speakers", "2", "--out", str(out),
                 "--report", str(tmp_path / "r.json")]) == 0  # fmt: skip
    report = json.loads((tmp_path / "r.json").read_text())
    assert report["config"]["onset"] == 0.6
    assert report["config"]["num_speakers"] == 2


def test_config_round_trip_and_errors():
    cfg = RunConfig(alpha=0.85, onset=0.6, scales=(1.0, 0.5), hops=(0.5, 0.25), num_speakers="oracle", vad_only=True)
    assert load_config(dump_config(cfg)) == cfg
    with pytest.raises(ValueError, match="unknown config section"):
        load_config("[bogus]\nx = 1\n")
    with pytest.raises(ValueError, match="unknown key"):
        load_config("[vad]\nonsett = 1\n")
    with pytest.raises(ValueError, match="reference"):
        RunConfig(num_speakers="oracle").validate()


def test_report_rendering():
    text = render_report({"der": {"der": 0.332, "fa_rate": 0.011, "miss_rate": 0.296, "cer_rate": 0.025}})
    lines = text.splitlines()
    assert lines[0].split("|") == ["   DER ", "     FA ", "   MISS ", "    CER"]
    assert [v.strip() for v in lines[2].split("|")] == ["33.2", "1.1", "29.6", "2.5"]
    assert len({len(line) for line in lines}) == 1
    with pytest.raises(ValueError, match="malformed"):
        render_report({"der": {"der": 0.1}})


def test_report_command(tmp_path, capsys):
    path = tmp_path / "r.json"
    path.write_text(json.dumps({"der": {"der": 0.332, "fa_rate": 0.011, "miss_rate": 0.296, "cer_rate": 0.025}}))
    assert main(["report", str(path)]) == 0
    out = capsys.readouterr().out
    assert "33.2" in out and "Type" not in out
    assert main(["report", str(path), "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["der"]["der"] == 0.332
    path.write_text("{broken")
    assert main(["report", str(path)]) == 1


def test_score_and_analyze(tmp_path, capsys):
    ref = tmp_path / "ref.rttm"
    hyp = tmp_path / "hyp.rttm"
    roles = tmp_path / "roles.txt"
    ref.write_text("SPEAKER f 1 0 10 <NA> <NA> t <NA> <NA>\nSPEAKER f 1 12 1 <NA> <NA> s <NA> <NA>\n")
    hyp.write_text("SPEAKER f 1 0 10 <NA> <NA> x <NA> <NA>\nSPEAKER f 1 12 1 <NA> <NA> x <NA> <NA>\n")
    roles.write_text(write_roles({"t": "teacher", "s": "student"}))
    js = tmp_path / "score.json"
    assert main(["score", "--ref", str(ref), "--hyp", str(hyp), "--roles", str(roles), "--breakdown",
                 "--json", str(js)]) == 0  # fmt: skip
    payload = json.loads(js.read_text())
    assert payload["der"]["cer_s"] == pytest.approx(1.0)
    assert payload["breakdown"]["percent"]["student"]["short"]["CER"] == pytest.approx(100.0)
    assert "fa_attribution" in payload["breakdown"]
    out = capsys.readouterr().out
    assert "Ratio" in out
    assert main(["analyze", "--ref", str(ref), "--hyp", str(hyp), "--roles", str(roles)]) == 0
    assert main(["analyze", "--ref", str(ref)]) == 1


def test_analyze_correlate(tmp_path, capsys):
    trials = tmp_path / "trials.csv"
    trials.write_text("onset,offset,alpha,der,fa,miss,cer\n0.5,0.3,1,0.1,0.05,0.05,0.0\n"
                      "0.6,0.3,1,0.2,0.1,0.05,0.05\n0.7,0.3,1,0.3,0.2,0.05,0.05\n")  # fmt: skip
    assert main(["analyze", "--correlate", str(trials)]) == 0
    assert "spearman(DER, FA+MISS) = 1.000" in capsys.readouterr().out


def test_vad_subcommands(tmp_path):
    track = tmp_path / "a.track"
    track.write_text(write_frame_track(planted_track()))
    ctm = tmp_path / "w.ctm"
    ctm.write_text(write_ctm([Word("hi", 0.4, 2.4)]))
    fused = tmp_path / "fused.track"
    assert main(["vad", "fuse", "--frame-vad", str(track), "--asr-ctm", str(ctm), "--alpha", "0.85",
                 "--out", str(fused)]) == 0  # fmt: skip
    t = parse_frame_track(fused.read_text())
    assert t.origin == "fused" and len(t) == len(planted_track())
    speech = tmp_path / "speech.rttm"
    assert main(["vad", "decode", "--track", str(track), "--out", str(speech)]) == 0
    turns = parse_rttm(speech.read_text())
    assert [(t.start_s, round(t.end_s, 3)) for t in turns] == [(a, b) for a, b, _ in PLANTED_SEGMENTS]
    windows = tmp_path / "windows.txt"
    assert main(["segment", "--speech", str(speech), "--out", str(windows)]) == 0
    per_scale = parse_windows(windows.read_text())
    assert len(per_scale) == 5
    emb = tmp_path / "emb.jsonl"
    emb.write_text(write_embeddings(planted_records()))
    hyp = tmp_path / "hyp.rttm"
    assert main(["cluster", "--embeddings", str(emb), "--windows", str(windows), "--speech", str(speech),
                 "--num-speakers", "2", "--file-id", "planted", "--out", str(hyp)]) == 0  # fmt: skip
    ref = tmp_path / "ref.rttm"
    ref.write_text(write_rttm(planted_reference()))
    js = tmp_path / "s.json"
    assert main(["score", "--ref", str(ref), "--hyp", str(hyp), "--json", str(js)]) == 0
    assert json.loads(js.read_text())["der"]["der"] == 0.0


def test_denoise_command(tmp_path):
    wav = tmp_path / "a.wav"
    wav.write_bytes(write_wav(AudioBuffer(16000, np.random.default_rng(0).uniform(-0.1, 0.1, 8000))))
    out = tmp_path / "out"
    assert main(["denoise", "--in", str(wav), "--out-dir", str(out)]) == 0
    assert (out / "a_denoised.wav").exists()
    assert (out / "manifest.tsv").read_text().count("\n") == 1


def test_tune_command(tmp_path, capsys):
    vad, asr_track, ref = tuning_fixture()
    (tmp_path / "dev.track").write_text(write_frame_track(vad))
    (tmp_path / "dev.rttm").write_text(write_rttm(ref))
    (tmp_path / "dev.ctm").write_text(write_ctm([Word("decoy", 3.2, 4.2)]))
    manifest = tmp_path / "dev.tsv"
    manifest.write_text("file_id frame_vad asr_ctm ref embeddings\ndev dev.track dev.ctm dev.rttm -\n")
    out = tmp_path / "trials.csv"
    assert main(["tune", "--manifest", str(manifest), "--out", str(out)]) == 0
    rows = out.read_text().splitlines()
    assert rows[1].startswith("0.5,0.3,1,0.000000")
    assert len(rows) - 1 == 2940
    assert "skipped 1155" in capsys.readouterr().err
    assert main(["tune", "--manifest", str(manifest), "--no-asr", "--out", str(out)]) == 0
    assert {r.split(",")[2] for r in out.read_text().splitlines()[1:]} == {"1"}


def test_diarize_function_requires_track():
    with pytest.raises(ValueError):
        diarize(RunConfig())
