import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diarkit.segmentation import MultiScalePlan, ScaleSpec, group_by_base_scale, plan_windows
from diarkit.vad import SpeechSegment


def _one(w, h):
    return MultiScalePlan((ScaleSpec(w, h),))


def _round(ws):
    return [(round(a, 9), round(b, 9)) for a, b in ws]


def test_plan_examples():
    (w,) = plan_windows([SpeechSegment(0.0, 3.0)], _one(1.5, 0.75))
    assert _round(w) == [(0.0, 1.5), (0.75, 2.25), (1.5, 3.0)]
    (w,) = plan_windows([SpeechSegment(0.0, 0.4)], _one(1.5, 0.75))
    assert w == [(0.0, 0.4)]
    assert plan_windows([], MultiScalePlan()) == [[], [], [], [], []]


def test_flush_window_only_for_long_remainders():
    # 2.0 s at (1.5, 0.75): one regular window, remainder 0.5 < 0.75 -> no flush window
    (w,) = plan_windows([SpeechSegment(0.0, 2.0)], _one(1.5, 0.75))
    assert _round(w) == [(0.0, 1.5)]
    # 2.3 s at (1.5, 1.0): remainder 0.8 >= 0.75 -> flush window ending at 2.3
    (w,) = plan_windows([SpeechSegment(0.0, 2.3)], _one(1.5, 1.0))
    assert _round(w) == [(0.0, 1.5), (0.8, 2.3)]


def test_plan_validation():
    with pytest.raises(ValueError):
        ScaleSpec(1.0, 1.5)
    with pytest.raises(ValueError):
        MultiScalePlan((ScaleSpec(0.5, 0.25), ScaleSpec(1.0, 0.5)))
    with pytest.raises(ValueError):
        MultiScalePlan((ScaleSpec(1.0, 0.5),), (0.7,))
    plan = MultiScalePlan.from_lists([1.0, 0.5], [0.5, 0.25])
    assert plan.weights == (0.5, 0.5)


@st.composite
def speech_lists(draw):
    n = draw(st.integers(0, 6))
    t = 0.0
    out = []
    for _ in range(n):
        t += draw(st.integers(1, 200)) / 100
        length = draw(st.integers(1, 600)) / 100
        out.append(SpeechSegment(round(t, 2), round(t + length, 2)))
        t += length
    return out


@settings(max_examples=150, deadline=None)
@given(speech_lists(), st.sampled_from([(1.5, 0.75), (1.0, 0.5), (0.5, 0.25), (1.25, 0.4)]))
def test_containment_and_count(speech, scale):
    w, h = scale
    (windows,) = plan_windows(speech, _one(w, h))
    i = 0
    for seg in speech:
        L = seg.end_s - seg.start_s
        if L < w - 1e-9:
            expected = 1
        else:
            regular = math.floor((L - w) / h + 1e-9) + 1
            tail = L - ((regular - 1) * h + w)
            expected = regular + (1 if tail >= w / 2 - 1e-9 else 0)
        mine = windows[i : i + expected]
        i += expected
        assert len(mine) == expected
        for a, b in mine:
            assert seg.start_s - 1e-9 <= a < b <= seg.end_s + 1e-9
    assert i == len(windows)


def test_group_examples():
    g = group_by_base_scale([[(0.0, 1.0)], [(0.0, 0.5)]])
    assert g.tolist() == [[0, 0]]
    g = group_by_base_scale([[(0.0, 1.0)], [(0.0, 0.5), (0.5, 1.0)]])
    assert g.tolist() == [[0, 0], [0, 1]]
    # base centre 1.0 is equidistant from coarse centres 0.5 and 1.5
    g = group_by_base_scale([[(0.0, 1.0), (1.0, 2.0)], [(0.75, 1.25)]])
    assert g.tolist() == [[0, 0]]


def test_group_respects_segments():
    speech = [SpeechSegment(0.0, 1.0), SpeechSegment(1.2, 1.7)]
    plan = MultiScalePlan.from_lists([1.0, 0.5], [0.5, 0.25])
    windows = plan_windows(speech, plan)
    g = group_by_base_scale(windows, speech)
    coarse = windows[0]
    for base_idx, coarse_idx in zip(g[:, 1], g[:, 0]):
        centre = sum(windows[1][base_idx]) / 2
        seg = 0 if centre < 1.1 else 1
        c = sum(coarse[coarse_idx]) / 2
        assert (0 if c < 1.1 else 1) == seg


def test_group_is_total_and_deterministic():
    rng = np.random.default_rng(0)
    speech = []
    t = 0.0
    for _ in range(8):
        t += rng.uniform(0.2, 1.0)
        d = rng.uniform(0.2, 5.0)
        speech.append(SpeechSegment(t, t + d))
        t += d
    windows = plan_windows(speech, MultiScalePlan())
    g1 = group_by_base_scale(windows, speech)
    g2 = group_by_base_scale(windows, speech)
    assert g1.shape == (len(windows[-1]), 5)
    assert np.array_equal(g1, g2)
    assert np.array_equal(g1[:, -1], np.arange(len(windows[-1])))
