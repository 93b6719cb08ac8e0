"""Anchored dense propagation.

Accepted corrections become anchors; the dense labeling is re-decoded
exactly by first-order dynamic programming over per-frame emission
preferences, a confidence-scaled switch penalty, and high-weight
per-frame anchor bonuses, with the confirmed cut frames enforced as hard
constraints.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from scribeloop.errors import ConstraintConflictError, InvariantError, StructureError
from scribeloop.intervals import FrameInterval
from scribeloop.labels import DenseLabeling
from scribeloop.proposal import LOG_FLOOR, ProposalOutput

W_PREV = 1.0  # reward for keeping the current hypothesis label
W_PROP = 1.0  # weight on proposal side-label log-posteriors
W_ANCHOR = 5.0  # per-frame bonus for matching an anchor's side label
PROP_LOG_CLIP = 4.0  # cap on the per-frame propagation penalty (< W_ANCHOR)
GAMMA_BASE = 0.8  # switch penalty at zero confidence
KAPPA = 1.0  # confidence scaling of the switch penalty
NEG_INF = -1e15  # finite stand-in for forbidden labels


@dataclass(frozen=True)
class Anchor:
    """Accepted correction: affected span [start, end] (inclusive),
    confirmed cut, confirmed side labels."""

    start: int
    end: int
    cut: int
    y_left: int
    y_right: int
    id: int = 0
    merge: bool = False  # confirmed "no boundary here"; cut is unused

    def __post_init__(self):
        if not self.start <= self.cut <= self.end:
            raise ValueError(f"anchor cut {self.cut} outside span [{self.start}, {self.end}]")
        if not self.merge and self.y_left == self.y_right:
            raise ValueError("boundary anchor needs distinct side labels")


@dataclass
class DecodeProblem:
    emissions: np.ndarray  # T x L
    gamma: np.ndarray  # length T, gamma[t] charged on a switch entering frame t
    protected_cuts: dict  # frame -> (y_left, y_right, anchor id)


def build_problem(
    hypothesis: DenseLabeling,
    num_labels: int,
    confidence: np.ndarray,
    anchors,
    recent: Optional[ProposalOutput] = None,
    latest: Optional[Anchor] = None,
    affected: Optional[FrameInterval] = None,
) -> DecodeProblem:
    """Assemble emissions, switch penalties, and constraints.

    Emissions reward the cached hypothesis everywhere; inside the
    affected window of the latest accepted anchor (its span unless the
    caller passes a wider interval) they are adjusted by the recent
    proposal's side-label log-posteriors relative to the anchor cut;
    each anchor adds a high-weight per-frame bonus over its span.
    """
    T = len(hypothesis)
    psi = np.zeros((T, num_labels), dtype=np.float64)
    psi[np.arange(T), hypothesis.labels] += W_PREV

    if latest is not None:
        # Clip the per-frame penalty below the anchor bonus so soft
        # propagation can never override an accepted anchor.
        log_l = np.full(num_labels, -PROP_LOG_CLIP)
        log_r = np.full(num_labels, -PROP_LOG_CLIP)
        if recent is not None:
            L = recent.p_left.shape[0]
            log_l[:L] = np.maximum(np.log(np.maximum(recent.p_left, LOG_FLOOR)), -PROP_LOG_CLIP)
            log_r[:L] = np.maximum(np.log(np.maximum(recent.p_right, LOG_FLOOR)), -PROP_LOG_CLIP)
        else:
            # Verdict-corrected sides: the posterior collapses to the
            # confirmed labels.
            log_l[latest.y_left] = 0.0
            log_r[latest.y_right] = 0.0
        span = affected if affected is not None else FrameInterval(latest.start, latest.end + 1)
        lo, hi = max(span.start, 0), min(span.end, T)
        cut = min(max(latest.cut, lo), hi)
        psi[lo:cut] += W_PROP * log_l
        psi[cut:hi] += W_PROP * log_r

    conf = np.asarray(confidence, dtype=np.float64)
    gamma = GAMMA_BASE * (1.0 + KAPPA * conf)

    protected = {}
    for a in anchors:
        if a.start < 0 or a.end >= T:
            raise StructureError(f"anchor {a.id} span [{a.start}, {a.end}] outside [0, {T})")
        if a.merge:
            psi[a.start : a.end + 1, a.y_left] += W_ANCHOR
            continue
        psi[a.start : a.cut, a.y_left] += W_ANCHOR
        psi[a.cut : a.end + 1, a.y_right] += W_ANCHOR
        prior = protected.get(a.cut)
        if prior is not None and (prior[0] != a.y_left or prior[1] != a.y_right):
            raise ConstraintConflictError(
                f"anchors {prior[2]} and {a.id} disagree at cut {a.cut}",
                anchor_ids=(prior[2], a.id),
            )
        protected[a.cut] = (a.y_left, a.y_right, a.id)

    # Hard-constrain the two frames around each protected cut.
    conflicts = []
    for cut, (y_l, y_r, aid) in protected.items():
        for frame, y in ((cut - 1, y_l), (cut, y_r)):
            if frame < 0 or frame >= T:
                continue
            other = [c for c, v in protected.items() if c != cut and frame in (c - 1, c)]
            row = psi[frame].copy()
            psi[frame, :] = NEG_INF
            psi[frame, y] = row[y]
            if other and psi[frame].max() <= NEG_INF:
                conflicts.append((aid, protected[other[0]][2]))
    if conflicts:
        ids = sorted({i for pair in conflicts for i in pair})
        raise ConstraintConflictError(f"conflicting protected cuts: anchors {ids}", anchor_ids=ids)

    return DecodeProblem(emissions=psi, gamma=gamma, protected_cuts=protected)


def decode(p: DecodeProblem) -> DenseLabeling:
    """Exact argmax of sum(psi) - sum(gamma * switches) by Viterbi DP.

    Ties prefer keeping the previous frame's label, then the lowest
    label index.
    """
    psi, gamma = p.emissions, p.gamma
    T, L = psi.shape
    score = psi[0].copy()
    back = np.empty((T, L), dtype=np.int64)
    back[0] = np.arange(L)
    for t in range(1, T):
        best_prev = int(np.argmax(score))  # lowest index on ties
        best_val = score[best_prev]
        switch = best_val - gamma[t]
        stay = score
        take_stay = stay >= switch
        new_score = np.where(take_stay, stay, switch) + psi[t]
        back[t] = np.where(take_stay, np.arange(L), best_prev)
        # label equal to best_prev switching "from itself" is just staying
        score = new_score
    labels = np.empty(T, dtype=np.int64)
    labels[-1] = int(np.argmax(score))
    for t in range(T - 1, 0, -1):
        labels[t - 1] = back[t, labels[t]]
    if psi[np.arange(T), labels].min() <= NEG_INF:
        raise ConstraintConflictError("no labeling satisfies the protected cuts")
    return DenseLabeling(labels=labels)


def objective_value(p: DecodeProblem, y: DenseLabeling) -> float:
    """Score of a labeling under the decode objective."""
    labels = y.labels
    em = float(p.emissions[np.arange(labels.size), labels].sum())
    switches = labels[1:] != labels[:-1]
    return em - float(p.gamma[1:][switches].sum())


def check_anchors(y: DenseLabeling, anchors) -> None:
    """Every boundary anchor must have its side labels on the frames
    adjacent to the cut (which implies a segment boundary there)."""
    labels = y.labels
    for a in anchors:
        if a.merge:
            continue
        if a.cut <= 0 or a.cut >= labels.size:
            raise InvariantError(f"anchor {a.id} cut {a.cut} outside the sequence")
        if labels[a.cut - 1] != a.y_left or labels[a.cut] != a.y_right:
            raise InvariantError(
                f"anchor {a.id} violated at cut {a.cut}: "
                f"labels ({labels[a.cut - 1]}, {labels[a.cut]}) "
                f"expected ({a.y_left}, {a.y_right})"
            )
