"""The correction loop: hold session state, serve planner queries,
interpret scribbles through the proposal model, route verdicts into
anchored propagation and adaptation, journal everything, and answer
queries from a ground-truth oracle for offline evaluation."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from scribeloop import adaptation, planner, propagate, proposal
from scribeloop.errors import ConstraintConflictError, GestureError, InvariantError
from scribeloop.features import FeatureSequence, boundary_energy
from scribeloop.intervals import FrameInterval
from scribeloop.labels import (
    BoundarySet,
    DenseLabeling,
    LabelVocab,
    Segmentation,
    boundary_f1,
    dense_from_segments,
    edit_score,
    segments_from_dense,
)
from scribeloop.propagate import Anchor
from scribeloop.scribble import GestureKind, Stroke, classify_gesture, encode_use, project_strokes

BACKGROUND_NAME = "__unlabeled__"
ORACLE_SNAP = 5  # frames within which a draft cut counts as correct
ORACLE_STROKE_WIDTH = 10
EDIT_CUE_RADIUS = 8  # frames within which an edit cue grabs a boundary
PLATEAU_ENERGY = 0.15  # window energy below this reads as a flat span
MEMORY_BIAS = 0.1
F1_DELTAS = (5, 10, 25, 50)


@dataclass(frozen=True)
class PolicyConfig:
    """Ablation switches for the harness; the default is the full system."""

    use_planner: bool = True  # False: random candidate order
    use_local_proposal: bool = True  # False: cut at interval center, labels from hypothesis
    use_adaptation: bool = True  # False: freeze all statistics
    use_dense_propagation: bool = True  # False: overwrite the span directly
    seed: int = 0


@dataclass
class JournalEvent:
    seq: int
    ts_ms: int
    kind: str
    payload: dict

    def to_json(self) -> str:
        return json.dumps(
            {"seq": self.seq, "ts_ms": self.ts_ms, "kind": self.kind, "payload": self.payload},
            sort_keys=True,
        )


class Journal:
    def __init__(self):
        self.events: list = []

    def append(self, ts_ms: int, kind: str, payload: dict) -> JournalEvent:
        ev = JournalEvent(seq=len(self.events), ts_ms=ts_ms, kind=kind, payload=payload)
        self.events.append(ev)
        return ev

    def to_jsonl(self) -> str:
        return "\n".join(ev.to_json() for ev in self.events) + "\n"

    @staticmethod
    def parse_jsonl(text: str) -> list:
        events = []
        for line in text.strip().splitlines():
            doc = json.loads(line)
            events.append(
                JournalEvent(
                    seq=doc["seq"], ts_ms=doc["ts_ms"], kind=doc["kind"], payload=doc["payload"]
                )
            )
        return events


def _anchor_payload(a: Anchor) -> dict:
    return {
        "start": a.start,
        "end": a.end,
        "cut": a.cut,
        "y_left": a.y_left,
        "y_right": a.y_right,
        "id": a.id,
        "merge": a.merge,
    }


def _anchor_from_payload(doc: dict) -> Anchor:
    return Anchor(
        start=doc["start"],
        end=doc["end"],
        cut=doc["cut"],
        y_left=doc["y_left"],
        y_right=doc["y_right"],
        id=doc["id"],
        merge=doc["merge"],
    )


@dataclass
class Draft:
    """A proposed correction awaiting a verdict."""

    anchor: Anchor
    output: Optional[proposal.ProposalOutput]
    encoding_span: tuple  # (start, end) of the scribble support, for effort proxies


class Session:
    """Single-writer interaction state for one video."""

    def __init__(
        self,
        features: FeatureSequence,
        vocab: LabelVocab,
        init: Optional[Segmentation] = None,
        budget: Optional[int] = None,
        model: Optional[proposal.ModelParams] = None,
        policy: PolicyConfig = PolicyConfig(),
        gt: Optional[Segmentation] = None,
        clock: Optional[Callable[[], int]] = None,
    ):
        self.features = features
        self.vocab = vocab
        self.num_labels = vocab.size
        self.decode_labels = vocab.size + 1  # + reserved background
        self.background = vocab.size
        T = features.num_frames
        if init is not None:
            if init.num_frames != T:
                raise ValueError(f"init covers {init.num_frames} frames, features have {T}")
            self.hypothesis = dense_from_segments(init)
        else:
            self.hypothesis = DenseLabeling(labels=np.full(T, self.background, dtype=np.int64))
        self.budget = budget
        self.policy = policy
        self.model = model if model is not None else proposal.init_params(
            features.dim, vocab.size, seed=policy.seed
        )
        self.adapt = adaptation.AdaptationState.fresh(vocab.size, features.dim)
        self.adapt.enabled = policy.use_adaptation
        self.anchors: list = []
        self.step = 0
        self.accepted = 0
        self.confidence = np.zeros(T, dtype=np.float64)
        self.rejected_frames: list = []
        self.asked_frames: list = []
        self.complete = False
        self.gt = gt
        self.energy = boundary_energy(features, FrameInterval(0, T)).values
        self.journal = Journal()
        self._clock = clock if clock is not None else (lambda: int(time.time() * 1000))
        self._rng = np.random.default_rng(policy.seed)
        self._next_anchor_id = 1
        self.pending_query: Optional[planner.Query] = None
        self.timings: dict = {"feature_lookup": [], "proposal": [], "query_scoring": [], "decode": []}
        self._journal(
            "init",
            {
                "T": T,
                "vocab": list(vocab.names),
                "budget": budget,
                "seed": policy.seed,
                "init_segments": list(init.segments) if init is not None else None,
                "model_version": self.model.version,
            },
        )

    # -- helpers -----------------------------------------------------

    @property
    def num_frames(self) -> int:
        return self.features.num_frames

    def _journal(self, kind: str, payload: dict) -> None:
        self.journal.append(self._clock(), kind, payload)

    def hypothesis_segments(self) -> Segmentation:
        return segments_from_dense(self.hypothesis)

    def _planner_view(self) -> planner.PlannerView:
        return planner.PlannerView(
            num_frames=self.num_frames,
            energy=self.energy,
            hypothesis_labels=self.hypothesis.labels,
            hypothesis_boundaries=self.hypothesis_segments().boundaries().times,
            confidence=self.confidence,
            anchor_cuts=tuple(a.cut for a in self.anchors if not a.merge),
            rejected_frames=tuple(self.rejected_frames),
            asked_frames=tuple(self.asked_frames),
            confusion=self.adapt.confusion.counts,
        )

    def metrics_against(self, gt: Segmentation) -> dict:
        pred = self.hypothesis_segments()
        row = {
            f"f1@{d}": boundary_f1(pred.boundaries(), gt.boundaries(), d) for d in F1_DELTAS
        }
        row["edit"] = edit_score(pred, gt)
        return row

    # -- loop operations ---------------------------------------------

    def next_query(self) -> Optional[planner.Query]:
        if self.budget is not None and self.accepted >= self.budget:
            self.complete = True
            self._journal("complete", {"reason": "budget_exhausted", "accepted": self.accepted})
            return None
        t0 = time.perf_counter()
        view = self._planner_view()
        candidates = planner.enumerate_candidates(view)
        scored = planner.score_candidates(candidates, view, self.adapt.weights, self.adapt.cost_model)
        if self.policy.use_planner:
            q = planner.select_next(scored)
        else:
            q = scored[int(self._rng.integers(len(scored)))] if scored else None
        self.timings["query_scoring"].append(time.perf_counter() - t0)
        if q is None:
            self.complete = True
            self._journal("complete", {"reason": "no_candidates", "accepted": self.accepted})
            return None
        self.pending_query = q
        self.asked_frames.append(q.t_q)
        self._journal(
            "query",
            {"t_q": q.t_q, "window": [q.window.start, q.window.end], "priority": q.priority,
             "utility": q.utility, "cost": q.cost, "provenance": q.provenance},
        )
        return q

    def propose(self, strokes) -> list:
        """Interpret uncertain-boundary strokes into one draft per
        covered boundary (left to right); edit cues are rejected here
        and must go through edit_segment."""
        gesture = classify_gesture(strokes, self.num_frames, self.hypothesis_segments().boundaries())
        if gesture == GestureKind.EDIT_CUE:
            raise GestureError("edit cues are routed to edit_segment, not propose")
        self._journal(
            "scribble",
            {"strokes": [[list(p) for p in s.points] for s in strokes], "gesture": gesture.value},
        )
        enc = encode_use(strokes, self.num_frames, self.hypothesis_segments())
        if enc.gesture == GestureKind.MULTI_BOUNDARY and enc.covered_boundaries:
            drafts = []
            for t_b in enc.covered_boundaries:
                sub = FrameInterval(
                    max(0, t_b - ORACLE_STROKE_WIDTH // 2),
                    min(self.num_frames, t_b + (ORACLE_STROKE_WIDTH + 1) // 2),
                )
                drafts.append(self._propose_one(self._sub_encoding(sub)))
            return drafts
        return [self._propose_one(enc)]

    def _sub_encoding(self, iplus: FrameInterval):
        from scribeloop.scribble import ScribbleEncoding, make_window

        window = make_window(iplus, self.num_frames)
        channels = np.zeros((3, len(window)), dtype=np.float64)
        channels[0, iplus.start - window.start : iplus.end - window.start] = 1.0
        return ScribbleEncoding(
            window=window,
            channels=channels,
            uncertain_interval=iplus,
            gesture=GestureKind.UNCERTAIN_BOUNDARY,
        )

    def _propose_one(self, enc) -> Draft:
        t0 = time.perf_counter()
        x = proposal.assemble_input(self.features, enc)
        self.timings["feature_lookup"].append(time.perf_counter() - t0)
        iplus = enc.uncertain_interval

        if not self.policy.use_local_proposal:
            cut = (iplus.start + iplus.end) // 2
            cut = min(max(cut, 1), self.num_frames - 1)
            y_l = int(self.hypothesis.labels[cut - 1])
            y_r = int(self.hypothesis.labels[cut])
            s, e = self._draft_span(x, iplus, cut)
            anchor = Anchor(start=s, end=e, cut=cut, y_left=y_l, y_right=y_r,
                            merge=(y_l == y_r))
            draft = Draft(anchor=anchor, output=None, encoding_span=(iplus.start, iplus.end))
            self._journal("proposal", {"cut": cut, "y_left": y_l, "y_right": y_r,
                                       "confidence": 0.5, "local_proposal": False})
            return draft

        t0 = time.perf_counter()
        out = proposal.forward(self.model, x)
        self.timings["proposal"].append(time.perf_counter() - t0)
        cut = min(max(out.cut, 1), self.num_frames - 1)
        s, e = self._draft_span(x, iplus, cut)
        y_l = self._biased_side(out.p_left, s, cut, left=True)
        y_r = self._biased_side(out.p_right, cut, e + 1, left=False)
        if y_l == y_r:
            # a boundary draft needs distinct sides; take the runner-up
            alt = int(np.argsort(out.p_right)[-2]) if self.num_labels > 1 else y_r
            y_r = alt if alt != y_l else y_r
        anchor = Anchor(start=s, end=e, cut=cut, y_left=y_l, y_right=y_r,
                        merge=(y_l == y_r))
        self._journal(
            "proposal",
            {"cut": cut, "y_left": y_l, "y_right": y_r, "confidence": out.confidence,
             "window": [out.window.start, out.window.end]},
        )
        return Draft(anchor=anchor, output=out, encoding_span=(iplus.start, iplus.end))

    def _draft_span(self, x: proposal.ProposalInput, iplus: FrameInterval, cut: int) -> tuple:
        """Expand the uncertain interval to the flanking low-energy
        plateaus, capped at the window, and make sure the cut is inside."""
        w = x.window
        s = iplus.start
        while s > w.start and x.energy[s - 1 - w.start] < PLATEAU_ENERGY:
            s -= 1
        e = iplus.end - 1
        while e < w.end - 1 and x.energy[e + 1 - w.start] < PLATEAU_ENERGY:
            e += 1
        s = max(0, min(s, cut))
        e = min(self.num_frames - 1, max(e, cut))
        return s, e

    def _prop_span(self, anchor: Anchor, out: Optional[proposal.ProposalOutput]) -> FrameInterval:
        """Affected window for dense propagation: the anchor span grown
        over the flanking low-energy plateaus (where stale boundaries
        have no feature support), capped at the proposal window."""
        if out is None:
            return FrameInterval(anchor.start, anchor.end + 1)
        w = out.window
        s = min(max(anchor.start, w.start), w.end - 1)
        e = min(max(anchor.end, w.start), w.end - 1)
        while s > w.start and self.energy[s - 1] < PLATEAU_ENERGY:
            s -= 1
        while e < w.end - 1 and self.energy[e + 1] < PLATEAU_ENERGY:
            e += 1
        return FrameInterval(s, e + 1)

    def _biased_side(self, posterior: np.ndarray, lo: int, hi: int, left: bool) -> int:
        """Argmax of the posterior multiplied by (1 + 0.1 * memory score)."""
        scores = np.zeros(self.num_labels)
        if hi > lo:
            span_mean = self.features.values[lo:hi].mean(axis=0)
            for y in range(self.num_labels):
                scores[y] += self.adapt.prototypes.similarity(y, span_mean)
        edge = lo if left else hi - 1
        h = int(self.hypothesis.labels[min(max(edge, 0), self.num_frames - 1)])
        if h < self.num_labels:
            row = self.adapt.confusion.counts[h]
            total = row.sum()
            if total > 0:
                scores += row / total
        biased = posterior * (1.0 + MEMORY_BIAS * scores)
        biased = biased / biased.sum()
        return int(np.argmax(biased))

    def verdict(self, draft: Draft, kind: str, final: Optional[Anchor] = None) -> None:
        """Apply an accepted/rejected/edited verdict to a draft."""
        if kind not in ("accepted", "rejected", "edited"):
            raise ValueError(f"unknown verdict {kind!r}")
        query = self.pending_query
        pre_f1 = (
            boundary_f1(self.hypothesis_segments().boundaries(), self.gt.boundaries(), 10)
            if self.gt is not None
            else None
        )
        anchor = None
        problem = None
        if kind != "rejected":
            source = draft.anchor if kind == "accepted" else final
            if source is None:
                raise ValueError("edited verdict requires a final anchor")
            anchor = Anchor(
                start=source.start, end=source.end, cut=source.cut,
                y_left=source.y_left, y_right=source.y_right,
                id=self._next_anchor_id, merge=source.merge,
            )
            if self.policy.use_dense_propagation:
                # Builds the decode problem before any state changes so a
                # constraint conflict leaves the session untouched for the
                # caller to resolve.
                problem = propagate.build_problem(
                    self.hypothesis, self.decode_labels, self.confidence,
                    self.anchors + [anchor],
                    recent=draft.output if kind == "accepted" else None,
                    latest=anchor,
                    affected=self._prop_span(anchor, draft.output),
                )
        self._journal(
            "verdict",
            {"kind": kind, "final": _anchor_payload(final) if final is not None else None,
             "draft": _anchor_payload(draft.anchor)},
        )
        if kind == "rejected":
            if query is not None:
                self.rejected_frames.append(query.t_q)
            self.step += 1
            self._record(query, draft, kind, realized_gain=0.0)
            return

        self._next_anchor_id += 1
        self.anchors.append(anchor)
        self._journal("anchor", _anchor_payload(anchor))

        if self.policy.use_dense_propagation:
            t0 = time.perf_counter()
            decoded = propagate.decode(problem)
            self.timings["decode"].append(time.perf_counter() - t0)
            self._journal("decode", {"anchors": len(self.anchors)})
            self.writeback(decoded)
        else:
            labels = self.hypothesis.labels.copy()
            if anchor.merge:
                labels[anchor.start : anchor.end + 1] = anchor.y_left
            else:
                labels[anchor.start : anchor.cut] = anchor.y_left
                labels[anchor.cut : anchor.end + 1] = anchor.y_right
            self.hypothesis = DenseLabeling(labels=labels)
            self._journal("writeback", {"mode": "overwrite"})

        raw_c = draft.output.confidence if draft.output is not None else 0.5
        if self.policy.use_adaptation:
            calibrated = self.adapt.calibration.calibrated(raw_c)
            self.confidence[anchor.start : anchor.end + 1] = calibrated
        self.step += 1
        self.accepted += 1

        gain = 0.0
        if self.gt is not None and pre_f1 is not None:
            post_f1 = boundary_f1(
                self.hypothesis_segments().boundaries(), self.gt.boundaries(), 10
            )
            gain = post_f1 - pre_f1
        else:
            gain = 1.0  # live mode: accepted flag
        self._record(query, draft, kind, realized_gain=gain, anchor=anchor)
        self._maybe_refine()

    def writeback(self, decoded: DenseLabeling) -> None:
        """Replace the hypothesis after checking every anchor's cut and
        side labels survived decoding."""
        if len(decoded) != self.num_frames:
            raise ValueError("decoded labeling length mismatch")
        propagate.check_anchors(decoded, self.anchors)
        self.hypothesis = decoded
        self._journal("writeback", {"mode": "decode"})

    def _record(self, query, draft: Draft, verdict: str, realized_gain: float,
                anchor: Optional[Anchor] = None) -> None:
        if query is None:
            return
        span = draft.encoding_span
        effort = (span[1] - span[0]) / 64.0
        rec = adaptation.OutcomeRecord(
            query=query,
            raw_confidence=draft.output.confidence if draft.output is not None else 0.5,
            verdict=verdict,
            realized_gain=realized_gain,
            observed_effort=effort,
            proposed_left=draft.anchor.y_left,
            proposed_right=draft.anchor.y_right,
            final_left=anchor.y_left if anchor is not None else None,
            final_right=anchor.y_right if anchor is not None else None,
            final_cut=anchor.cut if anchor is not None else None,
            span=(anchor.start, anchor.end) if anchor is not None else None,
            timestamp_ms=self._clock(),
        )
        self.adapt.record_outcome(rec, features=self.features)
        self._journal("adapt", {"verdict": verdict, "gain": realized_gain,
                                "weights": self.adapt.weights.as_array().tolist()})

    def _maybe_refine(self) -> None:
        task = self.adapt.maybe_refine()
        if task is None:
            return
        examples = []
        for rec in task:
            if rec.final_cut is None or rec.span is None:
                continue
            iplus = FrameInterval(
                max(0, rec.final_cut - ORACLE_STROKE_WIDTH // 2),
                min(self.num_frames, rec.final_cut + (ORACLE_STROKE_WIDTH + 1) // 2),
            )
            enc = self._sub_encoding(iplus)
            examples.append(
                proposal.TrainExample(
                    input=proposal.assemble_input(self.features, enc),
                    target_interval=iplus,
                    y_left=rec.final_left,
                    y_right=rec.final_right,
                )
            )
        if not examples:
            return
        try:
            refined = proposal.train(
                self.model, examples,
                proposal.TrainConfig(steps=50, seed=self.policy.seed),
            )
        except Exception as exc:  # divergence: keep the live model
            self._journal("swap", {"status": "discarded", "reason": str(exc)})
            return
        self.swap_model(refined)

    def swap_model(self, new: proposal.ModelParams) -> bool:
        if new.version <= self.model.version:
            self._journal("swap", {"status": "rejected", "version": new.version})
            return False
        self.model = new
        self._journal("swap", {"status": "applied", "version": new.version})
        return True

    def edit_segment(self, strokes) -> bool:
        """Delete the hypothesis boundary nearest an edit-cue stroke
        (within EDIT_CUE_RADIUS), merging toward the longer side."""
        supports = project_strokes(strokes, self.num_frames)
        cue = int(round(sum((s.start + s.end - 1) / 2 for s in supports) / len(supports)))
        self._journal(
            "scribble",
            {"strokes": [[list(p) for p in s.points] for s in strokes],
             "gesture": GestureKind.EDIT_CUE.value, "cue_frame": cue},
        )
        seg = self.hypothesis_segments()
        boundaries = seg.boundaries().times
        near = [t for t in boundaries if abs(t - cue) <= EDIT_CUE_RADIUS]
        if not near:
            self._journal("verdict", {"kind": "edited", "edit": "miss", "cue": cue})
            return False
        t = min(near, key=lambda b: (abs(b - cue), b))
        idx = boundaries.index(t)
        left, right = seg.segments[idx], seg.segments[idx + 1]
        keep = left[2] if (left[1] - left[0]) >= (right[1] - right[0]) else right[2]
        labels = self.hypothesis.labels.copy()
        labels[left[0] : right[1]] = keep
        self.hypothesis = DenseLabeling(labels=labels)
        self._journal("verdict", {"kind": "edited", "edit": "delete_boundary", "boundary": t})
        return True


def init_session(features, vocab, init=None, budget=None, **kwargs) -> Session:
    return Session(features, vocab, init=init, budget=budget, **kwargs)


# -- ground-truth oracle ----------------------------------------------


@dataclass(frozen=True)
class OracleAnswerer:
    """Simulated annotator that snaps corrections to the ground truth."""

    gt: Segmentation
    snap: int = ORACLE_SNAP

    def nearest_boundary(self, t: int) -> Optional[int]:
        times = self.gt.boundaries().times
        if not times:
            return None
        return min(times, key=lambda b: (abs(b - t), b))

    def scribble_for(self, q: planner.Query) -> Optional[list]:
        """A width-10 horizontal stroke centered on the GT boundary
        nearest the query, or None if the window holds no GT boundary."""
        in_window = [b for b in self.gt.boundaries().times if b in q.window]
        if not in_window:
            return None
        g = min(in_window, key=lambda b: (abs(b - q.t_q), b))
        T = self.gt.num_frames
        lo = max(0, g - ORACLE_STROKE_WIDTH // 2)
        hi = min(T - 1, g + ORACLE_STROKE_WIDTH // 2 - 1)
        points = tuple((float(t - lo), 0.5, t) for t in range(lo, hi + 1))
        if len(points) < 2:
            points = ((0.0, 0.5, max(0, g - 1)), (1.0, 0.5, min(T - 1, g)))
        return [Stroke(points=points)]

    def judge(self, q: planner.Query, draft: Draft) -> tuple:
        """("accepted", None) if the draft matches the ground truth within
        the snap tolerance, else ("edited", exact GT anchor)."""
        g = self.nearest_boundary(draft.anchor.cut)
        if g is None:
            return ("rejected", None)
        y_l = next(l for s, e, l in self.gt.segments if e == g)
        y_r = next(l for s, e, l in self.gt.segments if s == g)
        a = draft.anchor
        if not a.merge and abs(a.cut - g) <= self.snap and a.y_left == y_l and a.y_right == y_r:
            return ("accepted", None)
        T = self.gt.num_frames
        s = max(0, g - ORACLE_STROKE_WIDTH // 2)
        e = min(T - 1, g + ORACLE_STROKE_WIDTH // 2 - 1)
        s = min(s, g - 1) if g > 0 else s
        e = max(e, g)
        final = Anchor(start=max(0, s), end=e, cut=g, y_left=y_l, y_right=y_r)
        return ("edited", final)


def oracle_answer(o: OracleAnswerer, q: planner.Query, draft: Optional[Draft] = None):
    """Two-phase oracle: without a draft, returns (strokes, None); with a
    draft, returns (None, (verdict kind, final anchor))."""
    if draft is None:
        strokes = o.scribble_for(q)
        return (strokes, None if strokes is not None else ("rejected", None))
    return (None, o.judge(q, draft))


def run_budgeted(session: Session, oracle: OracleAnswerer) -> tuple:
    """Loop plan -> oracle scribble -> propose -> oracle verdict until the
    accepted-correction budget is spent or no queries remain.

    Returns (final segmentation, list of per-step metric rows); the trace
    has one row per accepted correction plus the initial row.
    """
    gt = oracle.gt
    trace = [session.metrics_against(gt)]
    session.timings.setdefault("total", [])
    component_cats = ("feature_lookup", "proposal", "query_scoring", "decode")
    while True:
        marks = {cat: len(session.timings[cat]) for cat in component_cats}
        q = session.next_query()
        if q is None:
            break
        strokes = oracle.scribble_for(q)
        if strokes is None:
            # no GT boundary in the window: reject without a proposal
            dummy = Draft(
                anchor=Anchor(start=q.t_q, end=q.t_q, cut=q.t_q, y_left=0, y_right=0, merge=True),
                output=None,
                encoding_span=(q.t_q, q.t_q + 1),
            )
            session._journal("scribble", {"strokes": [], "gesture": "oracle_reject"})
            session.verdict(dummy, "rejected")
            continue
        drafts = session.propose(strokes)
        for draft in drafts:
            kind, final = oracle.judge(q, draft)
            try:
                session.verdict(draft, kind, final=final)
            except ConstraintConflictError:
                # the boundary is already anchored nearby; nothing new to add
                kind = "rejected"
                session.verdict(draft, kind)
            if kind in ("accepted", "edited"):
                trace.append(session.metrics_against(gt))
            if session.budget is not None and session.accepted >= session.budget:
                break
        session.timings["total"].append(
            sum(
                sum(session.timings[cat][marks[cat]:])
                for cat in component_cats
            )
        )
    return session.hypothesis_segments(), trace


# -- journal replay ---------------------------------------------------


def replay_journal(
    features: FeatureSequence,
    vocab: LabelVocab,
    events: list,
    model: Optional[proposal.ModelParams] = None,
    gt: Optional[Segmentation] = None,
    policy: Optional[PolicyConfig] = None,
) -> Session:
    """Re-run a journaled session from its recorded scribbles and
    verdicts; with the same inputs the loop is deterministic, so the
    final hypothesis and adaptation statistics match the original."""
    init_ev = events[0]
    assert init_ev.kind == "init"
    p = init_ev.payload
    init_seg = (
        Segmentation(segments=tuple(tuple(s) for s in p["init_segments"]))
        if p["init_segments"] is not None
        else None
    )
    session = Session(
        features,
        vocab,
        init=init_seg,
        budget=p["budget"],
        model=model,
        policy=policy if policy is not None else PolicyConfig(seed=p["seed"]),
        gt=gt,
        clock=lambda: 0,
    )
    pending_drafts: list = []
    draft_idx = 0
    for ev in events[1:]:
        if ev.kind == "query":
            session.next_query()
        elif ev.kind == "scribble":
            gesture = ev.payload.get("gesture")
            strokes = [
                Stroke(points=tuple(tuple(pt) for pt in s)) for s in ev.payload["strokes"]
            ]
            if gesture == "oracle_reject":
                pending_drafts = [
                    Draft(
                        anchor=Anchor(
                            start=session.pending_query.t_q, end=session.pending_query.t_q,
                            cut=session.pending_query.t_q, y_left=0, y_right=0, merge=True,
                        ),
                        output=None,
                        encoding_span=(session.pending_query.t_q, session.pending_query.t_q + 1),
                    )
                ]
                draft_idx = 0
            elif gesture == GestureKind.EDIT_CUE.value:
                session.edit_segment(strokes)
                pending_drafts = []
            else:
                pending_drafts = session.propose(strokes)
                draft_idx = 0
        elif ev.kind == "verdict" and "edit" not in ev.payload:
            final = (
                _anchor_from_payload(ev.payload["final"])
                if ev.payload.get("final") is not None
                else None
            )
            session.verdict(pending_drafts[draft_idx], ev.payload["kind"], final=final)
            draft_idx += 1
    return session
