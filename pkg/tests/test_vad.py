import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diarkit.formats import FrameTrack, SpeakerTurn, Word
from diarkit.vad import (
    FusionWeight,
    SpeechSegment,
    VadThresholds,
    WindowScore,
    fuse,
    hysteresis_decode,
    merge_window_scores,
    segments_to_frames,
    speech_to_turns,
    turns_to_speech,
    words_to_frames,
)

ZERO_MIN = dict(min_duration_on_s=0.0, min_duration_off_s=0.0)


def _segs(segments):
    return [(round(s.start_s, 9), round(s.end_s, 9)) for s in segments]


def test_threshold_validation():
    with pytest.raises(ValueError):
        VadThresholds(onset=0.3, offset=0.5)
    with pytest.raises(ValueError):
        VadThresholds(min_duration_on_s=-1)
    with pytest.raises(ValueError):
        FusionWeight(1.2)


def test_words_to_frames_example():
    t = words_to_frames([Word("w", 0.50, 1.10)], 20, 100)
    assert t.origin == "asr"
    assert np.flatnonzero(t.probs).tolist() == list(range(25, 55))


def test_words_edge_cases():
    assert not np.any(words_to_frames([], 20, 10).probs)
    a = words_to_frames([Word("a", 0.1, 0.5), Word("b", 0.3, 0.9)], 20, 100)
    b = words_to_frames([Word("ab", 0.1, 0.9)], 20, 100)
    assert a == b
    clipped = words_to_frames([Word("late", 1.9, 5.0)], 20, 100)
    assert np.flatnonzero(clipped.probs).tolist() == list(range(95, 100))


def test_merge_window_scores():
    w = [WindowScore(0.0, 0.1, 0.2), WindowScore(0.0, 0.1, 0.8), WindowScore(0.2, 0.3, 0.6)]
    t = merge_window_scores(w, 20, 20)
    assert t.probs[:5] == pytest.approx([0.5] * 5)
    assert t.probs[5:10].tolist() == [0.0] * 5
    assert t.probs[10:15] == pytest.approx([0.6] * 5)
    lead = merge_window_scores([WindowScore(0.1, 0.2, 0.9)], 20, 10)
    assert lead.probs[:5].tolist() == [0.0] * 5


def test_fusion_examples():
    vad = FrameTrack([0.8, 0.1, 0.6])
    asr = FrameTrack([0.0, 1.0, 1.0], origin="asr")
    assert fuse(vad, asr, 1.0).probs.tolist() == vad.probs.tolist()
    assert fuse(vad, asr, 0.0).probs.tolist() == asr.probs.tolist()
    assert fuse(vad, asr, 0.5).probs[0] == pytest.approx(0.4)
    with pytest.raises(ValueError, match="frame size"):
        fuse(vad, FrameTrack([0.0], 10), 0.5)


def test_fusion_pads_shorter_track():
    out = fuse(FrameTrack([1.0, 1.0, 1.0]), FrameTrack([1.0], origin="asr"), 0.5)
    assert out.probs.tolist() == [1.0, 0.5, 0.5]


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=50), st.floats(0, 1))
def test_fusion_linearity(values, alpha):
    t = FrameTrack(values)
    assert fuse(t, t, alpha).probs.tolist() == t.probs.tolist()


def test_hysteresis_example():
    track = FrameTrack([0.1, 0.8, 0.5, 0.2, 0.9, 0.9, 0.1])
    segs = hysteresis_decode(track, VadThresholds(0.7, 0.3, **ZERO_MIN))
    assert _segs(segs) == [(0.02, 0.06), (0.08, 0.12)]


def test_hysteresis_trivial_cases():
    th = VadThresholds(0.7, 0.3, **ZERO_MIN)
    assert hysteresis_decode(FrameTrack([0.5] * 10), th) == []
    assert _segs(hysteresis_decode(FrameTrack([1.0] * 10), th)) == [(0.0, 0.2)]


def test_min_durations_and_padding():
    probs = [0.0] * 5 + [1.0] * 10 + [0.0] * 2 + [1.0] * 10 + [0.0] * 10 + [1.0] * 2 + [0.0] * 5
    track = FrameTrack(probs)
    # the 40 ms gap is bridged and the 40 ms blip dropped
    assert _segs(hysteresis_decode(track)) == [(0.1, 0.54)]
    padded = hysteresis_decode(track, VadThresholds(pad_onset_s=0.2, pad_offset_s=0.02, **ZERO_MIN))
    # padding makes all three runs overlap, and the start is clamped at 0
    assert _segs(padded) == [(0.0, 0.8)]


def _random_track(rng, n=300):
    # smooth-ish random walk so that runs of speech appear
    x = np.cumsum(rng.normal(0, 0.15, n))
    return FrameTrack(1 / (1 + np.exp(-x + rng.normal(0, 1))))


def _frames(segs, n):
    return segments_to_frames(segs, 20, n).probs.astype(bool)


def test_onset_monotonicity():
    rng = np.random.default_rng(0)
    for _ in range(100):
        track = _random_track(rng)
        offset = float(rng.uniform(0, 0.5))
        lo, hi = sorted(rng.uniform(offset, 1, 2))
        a = hysteresis_decode(track, VadThresholds(lo, offset))
        b = hysteresis_decode(track, VadThresholds(hi, offset))
        assert sum(s.duration_s for s in b) <= sum(s.duration_s for s in a) + 1e-9
        assert not np.any(_frames(b, len(track)) & ~_frames(a, len(track)))


def test_segments_to_frames():
    assert not np.any(segments_to_frames([], 20, 10).probs)
    assert segments_to_frames([SpeechSegment(0.0, 0.2)], 20, 10).probs.tolist() == [1.0] * 10


def test_decode_round_trip_on_grid():
    th = VadThresholds(0.5, 0.5, **ZERO_MIN)
    rng = np.random.default_rng(1)
    for _ in range(50):
        bits = (rng.random(200) < 0.3).astype(float)
        segs = hysteresis_decode(FrameTrack(bits), th)
        assert segments_to_frames(segs, 20, 200).probs.tolist() == bits.tolist()


def test_turn_conversions():
    segs = [SpeechSegment(0.0, 1.0), SpeechSegment(2.0, 3.5)]
    turns = speech_to_turns(segs, "f")
    assert {t.speaker for t in turns} == {"speech"}
    assert turns_to_speech(turns) == segs
    overlapping = [SpeakerTurn("f", 1, 0.0, 2.0, "a"), SpeakerTurn("f", 1, 1.0, 2.0, "b")]
    assert turns_to_speech(overlapping) == [SpeechSegment(0.0, 3.0)]
