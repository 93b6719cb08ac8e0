import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scribeloop.intervals import FrameInterval
from scribeloop.planner import (
    ANCHOR_EXCLUSION,
    NMS_RADIUS,
    TAU,
    CostModel,
    PlannerView,
    Query,
    UtilityWeights,
    _energy_peaks,
    enumerate_candidates,
    estimate_cost,
    priority,
    score_candidates,
    select_next,
    utility_components,
)


def make_view(T=100, energy=None, labels=None, confidence=None, boundaries=(),
              anchor_cuts=(), rejected=(), asked=(), confusion=None):
    return PlannerView(
        num_frames=T,
        energy=np.zeros(T) if energy is None else energy,
        hypothesis_labels=np.zeros(T, dtype=np.int64) if labels is None else labels,
        hypothesis_boundaries=tuple(boundaries),
        confidence=np.zeros(T) if confidence is None else confidence,
        anchor_cuts=tuple(anchor_cuts),
        rejected_frames=tuple(rejected),
        asked_frames=tuple(asked),
        confusion=confusion,
    )


def test_weights_simplex():
    UtilityWeights(0.4, 0.3, 0.2, 0.1)
    with pytest.raises(ValueError):
        UtilityWeights(0.5, 0.5, 0.5, 0.5)
    with pytest.raises(ValueError):
        UtilityWeights(-0.1, 0.5, 0.3, 0.3)


def test_energy_peaks_nms():
    e = np.zeros(50)
    e[10] = 1.0
    e[14] = 0.9  # suppressed: within NMS_RADIUS of the taller peak
    e[30] = 0.5
    assert _energy_peaks(e) == [10, 30]
    assert 14 - 10 <= NMS_RADIUS


def test_energy_peaks_need_positive_value():
    assert _energy_peaks(np.zeros(20)) == []


def test_enumerate_sources_and_exclusions():
    e = np.zeros(100)
    e[20] = 1.0
    e[60] = 0.8
    view = make_view(energy=e, boundaries=(40,), anchor_cuts=(60,))
    cands = enumerate_candidates(view)
    by_t = {q.t_q: q.provenance for q in cands}
    assert by_t == {20: "energy-peak", 40: "low-confidence-boundary"}
    # 60 dropped: within ANCHOR_EXCLUSION of its own anchor
    view2 = make_view(energy=e, boundaries=(40,), asked=(20,))
    assert {q.t_q for q in enumerate_candidates(view2)} == {40, 60}
    view3 = make_view(energy=e, boundaries=(40,), rejected=(41,))
    assert {q.t_q for q in enumerate_candidates(view3)} == {20, 60}
    assert abs(41 - 40) <= ANCHOR_EXCLUSION


def test_confident_boundaries_not_candidates():
    conf = np.ones(100) * 0.9
    view = make_view(confidence=conf, boundaries=(40,))
    assert enumerate_candidates(view) == []


def test_utility_components():
    e = np.zeros(100)
    e[50] = 0.7
    labels = np.zeros(100, dtype=np.int64)
    labels[50:] = 1
    conf = np.ones(100)
    conf[45:55] = 0.0
    confusion = np.zeros((3, 3))
    confusion[0, 1] = 3
    confusion[0, 2] = 1
    q = Query(t_q=50, window=FrameInterval(18, 83), provenance="energy-peak")
    view = make_view(energy=e, labels=labels, confidence=conf,
                     rejected=(60,), confusion=confusion)
    amb, dis, gain, hist = utility_components(q, view)
    assert amb == pytest.approx(0.7)
    assert dis == pytest.approx(3 / 4)  # confusion(0 -> 1)
    assert gain == pytest.approx(10 / 100)  # low-confidence run 45..55
    assert hist == pytest.approx(math.exp(-10 / 64))


def test_cost_and_priority():
    q = Query(t_q=10, window=FrameInterval(0, 64), provenance="energy-peak")
    m = CostModel()
    c = estimate_cost(q, m, ambiguity=0.5)
    assert c == pytest.approx(0.3 + 0.5 * 64 / 256 + 0.2 * 0.5)
    assert priority(1.0, c) == pytest.approx(1.0 / (c + TAU))
    with pytest.raises(ValueError):
        priority(1.0, c, tau=0.0)


def test_select_next_priority_and_ties():
    a = Query(t_q=30, window=FrameInterval(0, 10), provenance="energy-peak", priority=2.0)
    b = Query(t_q=10, window=FrameInterval(0, 10), provenance="energy-peak", priority=2.0)
    c = Query(t_q=5, window=FrameInterval(0, 10), provenance="energy-peak", priority=1.0)
    assert select_next([a, b, c]).t_q == 10
    assert select_next([]) is None


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_scored_candidates_consistent(seed):
    rng = np.random.default_rng(seed)
    e = np.clip(rng.normal(0.2, 0.3, size=80), 0, 1)
    view = make_view(T=80, energy=e, boundaries=(25, 50))
    scored = score_candidates(enumerate_candidates(view), view, UtilityWeights(), CostModel())
    for q in scored:
        assert q.cost >= 0.0
        assert q.priority == pytest.approx(q.utility / (q.cost + TAU))
        assert all(0.0 <= c <= 1.0 for c in q.components)
