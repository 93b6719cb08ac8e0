"""Correction-driven adaptation.

After every interaction the session records the outcome, which drives
four fast updates: an exponentiated-gradient step on the utility
weights, a normalized-LMS step on the effort model, a reliability-table
increment for confidence calibration, and prototype/confusion memory
maintenance. Accepted high-confidence corrections are also buffered for
slow-timescale model refinement on a checkpointed copy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from scribeloop.planner import COST_WINDOW_NORM, CostModel, Query, UtilityWeights

EG_ETA = 0.1
LMS_STEP = 0.05
NUM_BINS = 10
REFINE_BUFFER_SIZE = 32
REFINE_CONFIDENCE = 0.7


@dataclass(frozen=True)
class OutcomeRecord:
    query: Query
    raw_confidence: float
    verdict: str  # "accepted" | "rejected" | "edited"
    realized_gain: float
    observed_effort: float
    proposed_left: Optional[int] = None
    proposed_right: Optional[int] = None
    final_left: Optional[int] = None
    final_right: Optional[int] = None
    final_cut: Optional[int] = None
    span: Optional[tuple] = None  # (start, end) inclusive, for accepted anchors
    timestamp_ms: int = 0

    def __post_init__(self):
        if self.verdict not in ("accepted", "rejected", "edited"):
            raise ValueError(f"unknown verdict {self.verdict!r}")
        if not np.isfinite(self.realized_gain):
            raise ValueError("realized gain must be finite")
        if self.observed_effort < 0:
            raise ValueError("observed effort must be >= 0")


class CalibrationTable:
    """Equal-width reliability bins over raw confidence with Laplace
    smoothing; calibrated value is (accepts + 1) / (total + 2)."""

    def __init__(self, accepts=None, totals=None):
        self.accepts = np.zeros(NUM_BINS, dtype=np.int64) if accepts is None else np.asarray(accepts, dtype=np.int64).copy()
        self.totals = np.zeros(NUM_BINS, dtype=np.int64) if totals is None else np.asarray(totals, dtype=np.int64).copy()

    @staticmethod
    def bin_of(raw: float) -> int:
        if not 0.0 <= raw <= 1.0:
            raise ValueError("raw confidence must lie in [0, 1]")
        return min(NUM_BINS - 1, int(raw * NUM_BINS))

    def update(self, raw: float, accepted: bool) -> None:
        b = self.bin_of(raw)
        self.totals[b] += 1
        if accepted:
            self.accepts[b] += 1

    def calibrated(self, raw: float) -> float:
        b = self.bin_of(raw)
        return (self.accepts[b] + 1) / (self.totals[b] + 2)

    def copy(self) -> "CalibrationTable":
        return CalibrationTable(self.accepts, self.totals)


class PrototypeMemory:
    """Per-label running mean of accepted-segment features."""

    def __init__(self, num_labels: int, dim: int):
        self.means = np.zeros((num_labels, dim), dtype=np.float64)
        self.counts = np.zeros(num_labels, dtype=np.int64)

    def add(self, label: int, feature: np.ndarray) -> None:
        n = self.counts[label]
        self.means[label] = (self.means[label] * n + feature) / (n + 1)
        self.counts[label] += 1

    def similarity(self, label: int, feature: np.ndarray) -> float:
        """Cosine similarity to the stored prototype, 0 when unseen."""
        if self.counts[label] == 0:
            return 0.0
        proto = self.means[label]
        denom = np.linalg.norm(proto) * np.linalg.norm(feature)
        if denom == 0:
            return 0.0
        return float(max(0.0, proto @ feature / denom))


class ConfusionMemory:
    """Counts of (proposed label -> corrected label) events."""

    def __init__(self, num_labels: int):
        self.counts = np.zeros((num_labels, num_labels), dtype=np.int64)

    def add(self, proposed: int, corrected: int) -> None:
        self.counts[proposed, corrected] += 1


def update_utility_weights(w: UtilityWeights, rec: OutcomeRecord) -> UtilityWeights:
    """Exponentiated-gradient step toward components that produced gain."""
    comps = np.asarray(rec.query.components, dtype=np.float64)
    raw = w.as_array() * np.exp(EG_ETA * rec.realized_gain * comps)
    return UtilityWeights.from_array(raw / raw.sum())


def cost_features(q: Query) -> np.ndarray:
    return np.array([1.0, len(q.window) / COST_WINDOW_NORM, q.components[0]], dtype=np.float64)


def update_cost_model(m: CostModel, rec: OutcomeRecord) -> CostModel:
    """Normalized-LMS step toward the observed effort."""
    x = cost_features(rec.query)
    pred = float(m.coefficients() @ x)
    residual = rec.observed_effort - pred
    c = m.coefficients() + (m.step / (1.0 + x @ x)) * residual * x
    return CostModel(c0=float(c[0]), c1=float(c[1]), c2=float(c[2]), step=m.step)


@dataclass
class AdaptationState:
    """All fast-timescale statistics plus the slow-refinement buffer."""

    weights: UtilityWeights
    cost_model: CostModel
    calibration: CalibrationTable
    prototypes: PrototypeMemory
    confusion: ConfusionMemory
    history: list = field(default_factory=list)
    refine_buffer: list = field(default_factory=list)
    enabled: bool = True  # False freezes every update (ablation switch)

    @staticmethod
    def fresh(num_labels: int, dim: int) -> "AdaptationState":
        return AdaptationState(
            weights=UtilityWeights(),
            cost_model=CostModel(),
            calibration=CalibrationTable(),
            prototypes=PrototypeMemory(num_labels, dim),
            confusion=ConfusionMemory(num_labels),
        )

    def record_outcome(self, rec: OutcomeRecord, features=None) -> None:
        """Append and apply all fast updates in a fixed order."""
        self.history.append(rec)
        if not self.enabled:
            return
        self.weights = update_utility_weights(self.weights, rec)
        self.cost_model = update_cost_model(self.cost_model, rec)
        self.calibration.update(rec.raw_confidence, rec.verdict == "accepted")
        self._update_memories(rec, features)
        if (
            rec.verdict == "accepted"
            and self.calibration.calibrated(rec.raw_confidence) >= REFINE_CONFIDENCE
        ):
            self.refine_buffer.append(rec)

    def _update_memories(self, rec: OutcomeRecord, features) -> None:
        if (
            rec.verdict == "accepted"
            and features is not None
            and rec.span is not None
            and rec.final_cut is not None
        ):
            s, e = rec.span
            b = rec.final_cut
            if b > s and rec.final_left is not None:
                self.prototypes.add(rec.final_left, features.values[s:b].mean(axis=0))
            if e + 1 > b and rec.final_right is not None:
                self.prototypes.add(rec.final_right, features.values[b : e + 1].mean(axis=0))
        if rec.verdict in ("edited", "rejected"):
            if rec.proposed_left is not None and rec.final_left is not None:
                if rec.proposed_left != rec.final_left:
                    self.confusion.add(rec.proposed_left, rec.final_left)
            if rec.proposed_right is not None and rec.final_right is not None:
                if rec.proposed_right != rec.final_right:
                    self.confusion.add(rec.proposed_right, rec.final_right)

    def maybe_refine(self) -> Optional[list]:
        """Emit the buffered accepted corrections for background
        refinement once the buffer is full; clears the buffer."""
        if not self.enabled or len(self.refine_buffer) < REFINE_BUFFER_SIZE:
            return None
        task = list(self.refine_buffer)
        self.refine_buffer.clear()
        return task

    def serialize(self) -> str:
        doc = {
            "weights": self.weights.as_array().tolist(),
            "cost": self.cost_model.coefficients().tolist(),
            "calibration": {
                "accepts": self.calibration.accepts.tolist(),
                "totals": self.calibration.totals.tolist(),
            },
            "prototype_counts": self.prototypes.counts.tolist(),
            "prototype_means": self.prototypes.means.tolist(),
            "confusion": self.confusion.counts.tolist(),
            "history_len": len(self.history),
            "buffer_len": len(self.refine_buffer),
        }
        return json.dumps(doc, sort_keys=True)
