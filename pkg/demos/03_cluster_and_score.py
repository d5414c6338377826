"""
Clustering speaker embeddings and scoring the result
====================================================

Speech segments are cut into overlapping windows at several lengths. Each
window has an embedding; cosine affinities from every scale are averaged
onto the finest scale and clustered spectrally.
"""

import numpy as np

from diarkit.clustering import (
    estimate_num_speakers,
    labels_to_turns,
    multi_scale_affinity,
    spectral_cluster,
)
from diarkit.formats import SpeakerTurn
from diarkit.scoring import der, error_breakdown
from diarkit.segmentation import MultiScalePlan, group_by_base_scale, plan_windows
from diarkit.vad import SpeechSegment

# who speaks when: a teacher with long turns, a student with short ones
truth = [(0.0, 6.0, "teacher"), (6.5, 8.0, "student"), (8.5, 15.0, "teacher"),
         (15.5, 16.8, "student"), (17.0, 24.0, "teacher"), (24.2, 26.0, "student")]
speech = [SpeechSegment(a, b) for a, b, _ in truth]
plan = MultiScalePlan()
windows = plan_windows(speech, plan)
print("windows per scale:", [len(w) for w in windows])

# %%
# Fake embeddings: one direction per speaker plus a little noise.
rng = np.random.default_rng(1)
centre = {"teacher": rng.normal(size=16), "student": rng.normal(size=16)}


def speaker_at(t):
    return next(spk for a, b, spk in truth if a <= t < b + 1e-9)


emb = [np.array([centre[speaker_at((a + b) / 2)] + 0.3 * rng.normal(size=16) for a, b in ws]) for ws in windows]

# %%
# Every base window is tied to its nearest window at each coarser scale,
# and the fused affinity is the weighted sum of per-scale cosine matrices.
groups = group_by_base_scale(windows, speech)
aff = multi_scale_affinity(emb, groups, plan.weights)
k = estimate_num_speakers(aff)
print("estimated speakers:", k)
result = spectral_cluster(aff, k, method="eigen_gap")
hyp = labels_to_turns(windows[-1], result.labels, "class1")
for t in hyp:
    print(f"  {t.speaker:10s} {t.start_s:6.2f} {t.end_s:6.2f}")

# %%
# Diarization error rate: false alarm, missed speech and speaker confusion
# as fractions of reference speech, after the best one-to-one label mapping.
# The small miss is segment tails shorter than half a base window, which no
# window covers.
ref = [SpeakerTurn("class1", 1, a, round(b - a, 3), spk) for a, b, spk in truth]
rep = der(ref, hyp)
print(f"DER {rep.der:.3f} = FA {rep.fa_rate:.3f} + MISS {rep.miss_rate:.3f} + CER {rep.cer_rate:.3f}")
print("mapping:", rep.mapping["class1"])

# %%
# A worse hypothesis: everything attributed to one speaker. The breakdown
# by role and turn length shows where the confusion lives.
lazy = [SpeakerTurn("class1", 1, 0.0, 26.0, "spk")]
bd = error_breakdown(ref, lazy, {"teacher": "teacher", "student": "student"})
for role, cols in bd.percent.items():
    for bucket, col in cols.items():
        if col is not None:
            print(f"  {role:8s} {bucket:6s} " + "  ".join(f"{k} {v:5.1f}" for k, v in col.items()))
