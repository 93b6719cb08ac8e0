"""Cost-aware query planning.

Candidates come from boundary-energy peaks and low-confidence hypothesis
boundaries; each is scored by a weighted utility over ambiguity,
disagreement, expected gain, and correction history, divided by a
regularized effort estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from scribeloop.intervals import FrameInterval
from scribeloop.scribble import make_window

TAU = 0.1  # priority denominator regularizer
NMS_RADIUS = 8  # energy-peak non-maximum suppression, frames
CONFIDENCE_GATE = 0.5  # hypothesis boundaries below this are candidates
ANCHOR_EXCLUSION = 5  # frames around an accepted cut no new query may target
COST_WINDOW_NORM = 256.0  # frames; 4x the maximum window span


@dataclass(frozen=True)
class UtilityWeights:
    ambiguity: float = 0.25
    disagreement: float = 0.25
    gain: float = 0.25
    history: float = 0.25

    def __post_init__(self):
        vals = self.as_array()
        if vals.min() < 0 or abs(vals.sum() - 1.0) > 1e-9:
            raise ValueError(f"utility weights must lie on the simplex, got {vals}")

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.ambiguity, self.disagreement, self.gain, self.history], dtype=np.float64
        )

    @staticmethod
    def from_array(arr) -> "UtilityWeights":
        a = np.asarray(arr, dtype=np.float64)
        return UtilityWeights(float(a[0]), float(a[1]), float(a[2]), float(a[3]))


@dataclass(frozen=True)
class CostModel:
    c0: float = 0.3
    c1: float = 0.5
    c2: float = 0.2
    step: float = 0.05

    def coefficients(self) -> np.ndarray:
        return np.array([self.c0, self.c1, self.c2], dtype=np.float64)


@dataclass(frozen=True)
class Query:
    t_q: int
    window: FrameInterval
    provenance: str  # "energy-peak" | "low-confidence-boundary"
    utility: float = 0.0
    cost: float = 0.0
    priority: float = 0.0
    components: tuple = (0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class PlannerView:
    """Read-only snapshot of the session quantities the planner scores
    against."""

    num_frames: int
    energy: np.ndarray  # full-sequence normalized boundary energy
    hypothesis_labels: np.ndarray
    hypothesis_boundaries: tuple
    confidence: np.ndarray  # per-frame calibrated confidence
    anchor_cuts: tuple
    rejected_frames: tuple
    asked_frames: tuple = ()
    confusion: Optional[np.ndarray] = None  # L x L correction counts


def _energy_peaks(energy: np.ndarray) -> list:
    """Strict local maxima, non-maximum suppressed within NMS_RADIUS."""
    e = np.asarray(energy)
    if e.size < 3:
        return []
    interior = (e[1:-1] > e[:-2]) & (e[1:-1] >= e[2:]) & (e[1:-1] > 0)
    peaks = (np.flatnonzero(interior) + 1).tolist()
    peaks.sort(key=lambda t: (-e[t], t))
    kept = []
    for t in peaks:
        if all(abs(t - k) > NMS_RADIUS for k in kept):
            kept.append(t)
    return sorted(kept)


def enumerate_candidates(view: PlannerView) -> list:
    """Unscored queries: energy peaks plus low-confidence hypothesis
    boundaries, minus anything near an accepted cut or a query already
    asked (asking the same site again gets the same answer)."""
    sources = {}
    for t in _energy_peaks(view.energy):
        sources[t] = "energy-peak"
    for t in view.hypothesis_boundaries:
        if view.confidence[t] < CONFIDENCE_GATE and t not in sources:
            sources[t] = "low-confidence-boundary"
    out = []
    for t in sorted(sources):
        if any(abs(t - c) <= ANCHOR_EXCLUSION for c in view.anchor_cuts):
            continue
        if any(abs(t - r) <= ANCHOR_EXCLUSION for r in view.rejected_frames):
            continue
        if any(abs(t - a) <= ANCHOR_EXCLUSION for a in view.asked_frames):
            continue
        window = make_window(FrameInterval(t, t + 1), view.num_frames)
        out.append(Query(t_q=t, window=window, provenance=sources[t]))
    return out


def _confusion_prob(conf: Optional[np.ndarray], a: int, b: int) -> float:
    if conf is None or a >= conf.shape[0] or b >= conf.shape[1]:
        return 0.0
    row = conf[a].sum()
    return float(conf[a, b] / row) if row > 0 else 0.0


def utility_components(q: Query, view: PlannerView) -> tuple:
    """(ambiguity, disagreement, gain, history), each in [0, 1]."""
    t = q.t_q
    amb = float(np.clip(view.energy[t], 0.0, 1.0))

    y = view.hypothesis_labels
    y_l = int(y[max(t - 1, 0)])
    y_r = int(y[min(t, y.size - 1)])
    if y_l == y_r:
        split_suggested = (
            view.confusion is not None
            and y_l < view.confusion.shape[0]
            and view.confusion[y_l].sum() > 0
        )
        dis = 1.0 if split_suggested else 0.0
    else:
        dis = _confusion_prob(view.confusion, y_l, y_r)

    # extent of the contiguous low-confidence run containing t
    confident = np.flatnonzero(np.asarray(view.confidence) >= CONFIDENCE_GATE)
    pos = int(np.searchsorted(confident, t))
    lo = int(confident[pos - 1]) + 1 if pos > 0 else 0
    hi = int(confident[pos]) if pos < confident.size else view.num_frames
    gain = (hi - lo) / view.num_frames

    if view.rejected_frames:
        d = min(abs(t - r) for r in view.rejected_frames)
        hist = math.exp(-d / 64.0)
    else:
        hist = 0.0
    return (amb, float(np.clip(dis, 0, 1)), float(np.clip(gain, 0, 1)), hist)


def utility(q: Query, view: PlannerView, w: UtilityWeights) -> float:
    comps = np.array(utility_components(q, view))
    return float(w.as_array() @ comps)


def estimate_cost(q: Query, m: CostModel, ambiguity: float) -> float:
    raw = m.c0 + m.c1 * len(q.window) / COST_WINDOW_NORM + m.c2 * ambiguity
    return max(0.0, raw)


def priority(u: float, c: float, tau: float = TAU) -> float:
    if tau <= 0:
        raise ValueError("tau must be positive")
    return u / (c + tau)


def score_candidates(candidates, view: PlannerView, w: UtilityWeights, m: CostModel) -> list:
    scored = []
    for q in candidates:
        comps = utility_components(q, view)
        u = float(w.as_array() @ np.asarray(comps))
        c = estimate_cost(q, m, comps[0])
        scored.append(replace(q, utility=u, cost=c, priority=priority(u, c), components=comps))
    return scored


def select_next(candidates) -> Optional[Query]:
    """Highest priority; ties go to the earlier frame."""
    if not candidates:
        return None
    return min(candidates, key=lambda q: (-q.priority, q.t_q))
