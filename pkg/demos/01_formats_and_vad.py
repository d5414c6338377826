"""
From frame probabilities to speech segments
===========================================

A frame-level VAD gives one speech probability per frame. Word
timestamps from a recogniser give a second, binary opinion. This demo
fuses the two and decodes the result with hysteresis thresholds.
"""

import numpy as np

from diarkit.formats import FrameTrack, Word, parse_frame_track, write_frame_track
from diarkit.vad import FusionWeight, VadThresholds, fuse, hysteresis_decode, words_to_frames

# a 3 s track: a confident burst, a hesitant stretch and a spike of noise
probs = np.full(300, 0.05)
probs[20:110] = 0.9
probs[60:66] = 0.4          # short dip inside the first utterance
probs[150:230] = 0.55       # below onset on its own
probs[260:263] = 0.95       # 30 ms spike
vad = FrameTrack(probs, frame_ms=10)
print(f"{len(vad)} frames, {vad.duration_s:.2f} s")

# %%
# The track format is plain text, one probability per line.
text = write_frame_track(vad)
print(text.splitlines()[:3])
assert parse_frame_track(text) == vad

# %%
# Decoding the VAD alone. The dip stays above ``offset`` so the first
# utterance is kept whole; the spike is shorter than ``min_duration_on``.
th = VadThresholds(onset=0.7, offset=0.3, min_duration_on_s=0.1, min_duration_off_s=0.1)
for seg in hysteresis_decode(vad, th):
    print(f"  vad only   {seg.start_s:5.2f} - {seg.end_s:5.2f}")

# %%
# The recogniser heard words in the hesitant stretch.
words = [Word("well", 1.52, 1.80), Word("maybe", 1.85, 2.25)]
asr = words_to_frames(words, frame_ms=10, total_frames=len(vad))
fused = fuse(vad, asr, FusionWeight(0.5))
print("fused value at 1.6 s:", fused.probs[160])
for seg in hysteresis_decode(fused, th):
    print(f"  fused      {seg.start_s:5.2f} - {seg.end_s:5.2f}")

# %%
# Equal weighting recovers the hesitant words but loses the first
# utterance, where the recogniser produced nothing. A weight closer to the
# VAD keeps both.
for seg in hysteresis_decode(fuse(vad, asr, FusionWeight(0.8)), VadThresholds(onset=0.6, offset=0.3)):
    print(f"  alpha 0.8  {seg.start_s:5.2f} - {seg.end_s:5.2f}")

# %%
# alpha = 1 ignores the recogniser; alpha = 0 trusts it completely.
assert fuse(vad, asr, FusionWeight(1.0)).probs.tolist() == vad.probs.tolist()
assert fuse(vad, asr, FusionWeight(0.0)).probs.tolist() == asr.probs.tolist()
