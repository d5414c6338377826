"""
End to end through the command line
===================================

The ``diarkit`` command works on files: frame probabilities, word
timestamps and embeddings in, RTTM and a JSON report out. Here the inputs
are synthesised into a temporary directory and the commands are invoked
through :func:`diarkit.cli.main`, exactly as the shell entry point does.
"""

import json
import tempfile
from pathlib import Path

import numpy as np

from diarkit.cli import main
from diarkit.formats import (
    EmbeddingRecord,
    FrameTrack,
    SpeakerTurn,
    Word,
    write_ctm,
    write_embeddings,
    write_frame_track,
    write_roles,
    write_rttm,
)
from diarkit.segmentation import MultiScalePlan, plan_windows
from diarkit.vad import SpeechSegment

truth = [(0.5, 4.0, "teacher"), (4.6, 5.8, "student"), (6.2, 11.0, "teacher"), (11.5, 13.0, "student")]
frames = 1400  # 10 ms frames

probs = np.full(frames, 0.05)
for a, b, _ in truth:
    probs[int(a * 100):int(b * 100)] = 0.85
words = [Word("w", a, b) for a, b, _ in truth]

# %%
# Embeddings are keyed by scale index and window bounds, so they are
# produced for the windows the pipeline will plan from this VAD output.
# Voices whose embeddings point in similar directions get merged by the
# eigen-gap count, so the two here are kept orthogonal.
rng = np.random.default_rng(7)
basis = np.linalg.qr(rng.normal(size=(8, 2)))[0].T  # two orthogonal voices
centre = {"teacher": basis[0], "student": basis[1]}
speech = [SpeechSegment(a, b) for a, b, _ in truth]
records = []
for s, ws in enumerate(plan_windows(speech, MultiScalePlan())):
    for a, b in ws:
        spk = next(name for x, y, name in truth if x <= (a + b) / 2 < y)
        records.append(EmbeddingRecord(s, a, b, centre[spk] + 0.1 * rng.normal(size=8)))

tmp = Path(tempfile.mkdtemp())
(tmp / "c.track").write_text(write_frame_track(FrameTrack(probs, frame_ms=10)))
(tmp / "c.ctm").write_text(write_ctm(words, file_id="c"))
(tmp / "c.jsonl").write_text(write_embeddings(records))
(tmp / "ref.rttm").write_text(write_rttm(SpeakerTurn("c", 1, a, round(b - a, 3), s) for a, b, s in truth))
(tmp / "roles.txt").write_text(write_roles({"teacher": "teacher", "student": "student"}))

# %%
# Diarize, then score the output with a role breakdown.
rc = main(["diarize", "--frame-vad", str(tmp / "c.track"), "--asr-ctm", str(tmp / "c.ctm"),
           "--embeddings", str(tmp / "c.jsonl"), "--ref", str(tmp / "ref.rttm"), "--alpha", "0.8",
           "--file-id", "c", "--out", str(tmp / "hyp.rttm"), "--report", str(tmp / "report.json")])
print("exit", rc)
print((tmp / "hyp.rttm").read_text())
report = json.loads((tmp / "report.json").read_text())
print("speakers:", report["cluster"], " DER:", report["der"]["der"])

main(["score", "--ref", str(tmp / "ref.rttm"), "--hyp", str(tmp / "hyp.rttm"),
      "--roles", str(tmp / "roles.txt"), "--breakdown"])

# %%
# The same run twice gives the same bytes; the seed and config hash are in
# the report so a run can be reproduced later.
first = (tmp / "hyp.rttm").read_bytes()
main(["diarize", "--frame-vad", str(tmp / "c.track"), "--asr-ctm", str(tmp / "c.ctm"),
      "--embeddings", str(tmp / "c.jsonl"), "--alpha", "0.8", "--file-id", "c", "--out", str(tmp / "again.rttm"),
      "--report", str(tmp / "again.json")])
print("identical:", first == (tmp / "again.rttm").read_bytes(), " seed:", report["seed"], " config:", report["config_hash"])
