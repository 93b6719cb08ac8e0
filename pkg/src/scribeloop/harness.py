"""Offline mechanism analysis: run policy variants over case sets with
the ground-truth oracle, and aggregate budget curves, final metrics, and
per-component latency statistics."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from scribeloop import proposal
from scribeloop.features import FeatureSequence
from scribeloop.labels import (
    DenseLabeling,
    LabelVocab,
    Segmentation,
    dense_from_segments,
    interaction_budget,
    segments_from_dense,
)
from scribeloop.session import (
    F1_DELTAS,
    OracleAnswerer,
    PolicyConfig,
    Session,
    run_budgeted,
)

LATENCY_CATEGORIES = ("feature_lookup", "proposal", "query_scoring", "decode", "total")


class PolicyVariant(enum.Enum):
    FULL = "full"
    NO_CQP = "no-cqp"
    NO_LOCAL_PROP = "no-local"
    NO_CDA = "no-cda"
    NO_DENSE_PROP = "no-dense"

    def config(self, seed: int) -> PolicyConfig:
        return PolicyConfig(
            use_planner=self is not PolicyVariant.NO_CQP,
            use_local_proposal=self is not PolicyVariant.NO_LOCAL_PROP,
            use_adaptation=self is not PolicyVariant.NO_CDA,
            use_dense_propagation=self is not PolicyVariant.NO_DENSE_PROP,
            seed=seed,
        )


@dataclass(frozen=True)
class Case:
    name: str
    features: FeatureSequence
    vocab: LabelVocab
    gt: Segmentation
    init: Optional[Segmentation] = None


@dataclass
class RunReport:
    variant: str
    seed: int
    traces: dict = field(default_factory=dict)  # case name -> list of metric rows
    final: dict = field(default_factory=dict)  # metric -> mean over cases
    accepted_steps: int = 0
    total_steps: int = 0
    latency: dict = field(default_factory=dict)  # category -> stats
    failures: dict = field(default_factory=dict)  # case name -> error string

    def to_json(self, include_latency: bool = True) -> str:
        doc = {
            "variant": self.variant,
            "seed": self.seed,
            "traces": self.traces,
            "final": self.final,
            "accepted_steps": self.accepted_steps,
            "total_steps": self.total_steps,
            "failures": self.failures,
        }
        if include_latency:
            doc["latency"] = self.latency
        return json.dumps(doc, sort_keys=True, indent=2)

    @staticmethod
    def from_json(text: str) -> "RunReport":
        doc = json.loads(text)
        return RunReport(
            variant=doc["variant"],
            seed=doc["seed"],
            traces=doc["traces"],
            final=doc["final"],
            accepted_steps=doc["accepted_steps"],
            total_steps=doc["total_steps"],
            latency=doc.get("latency", {}),
            failures=doc.get("failures", {}),
        )


def pretrain_model(cases, seed: int = 0, examples_per_case: int = 20,
                   steps: int = 300) -> proposal.ModelParams:
    """Synthetic-scribble pretraining over the case set's ground truths."""
    rng = np.random.default_rng(seed)
    examples = []
    for case in cases:
        for _ in range(examples_per_case):
            examples.append(proposal.synthesize_scribble(case.gt, case.features, rng))
    dim = cases[0].features.dim
    num_labels = cases[0].vocab.size
    model = proposal.init_params(dim, num_labels, seed=seed)
    return proposal.train(model, examples, proposal.TrainConfig(steps=steps, seed=seed))


def run_case(case: Case, variant: PolicyVariant, seed: int,
             model: Optional[proposal.ModelParams] = None,
             budget_mult: float = 1.5) -> tuple:
    """One oracle session; returns (session, metric trace)."""
    budget = interaction_budget(case.gt, mult=budget_mult)
    clock_state = {"t": 0}

    def clock():
        clock_state["t"] += 1
        return clock_state["t"]

    session = Session(
        case.features,
        case.vocab,
        init=case.init,
        budget=budget,
        model=model,
        policy=variant.config(seed),
        gt=case.gt,
        clock=clock,
    )
    oracle = OracleAnswerer(gt=case.gt)
    _, trace = run_budgeted(session, oracle)
    return session, trace


def run_policy(cases, variant: PolicyVariant, seed: int = 0,
               model: Optional[proposal.ModelParams] = None,
               budget_mult: float = 1.5) -> RunReport:
    """Run every case under the variant; per-case failures are isolated."""
    if model is None:
        model = pretrain_model(cases, seed=seed)
    report = RunReport(variant=variant.value, seed=seed)
    finals = []
    timings = {cat: [] for cat in LATENCY_CATEGORIES}
    for case in cases:
        try:
            session, trace = run_case(case, variant, seed, model=model, budget_mult=budget_mult)
        except Exception as exc:
            report.failures[case.name] = f"{type(exc).__name__}: {exc}"
            continue
        report.traces[case.name] = trace
        finals.append(trace[-1])
        report.accepted_steps += session.accepted
        report.total_steps += session.step
        for cat in LATENCY_CATEGORIES:
            timings[cat].extend(session.timings.get(cat, []))
    if finals:
        keys = finals[0].keys()
        report.final = {k: float(np.mean([row[k] for row in finals])) for k in keys}
    report.latency = {
        cat: latency_stats(vals) for cat, vals in timings.items() if vals
    }
    return report


def budget_curve(report: RunReport, metric: str) -> list:
    """Mean metric value per accepted step; shorter cases carry their
    final value forward."""
    traces = list(report.traces.values())
    if not traces:
        return []
    depth = max(len(t) for t in traces)
    series = []
    for step in range(depth):
        vals = [t[min(step, len(t) - 1)][metric] for t in traces]
        series.append((step, float(np.mean(vals))))
    return series


def area_under_curve(report: RunReport, metric: str) -> float:
    series = budget_curve(report, metric)
    return float(np.mean([v for _, v in series])) if series else 0.0


def _nearest_rank(sorted_vals: np.ndarray, pct: float) -> float:
    n = sorted_vals.size
    rank = max(1, math.ceil(pct / 100.0 * n))
    return float(sorted_vals[rank - 1])


def latency_stats(samples) -> dict:
    vals = np.sort(np.asarray(samples, dtype=np.float64))
    return {
        "mean": float(vals.mean()),
        "std": float(vals.std()),
        "p95": _nearest_rank(vals, 95),
        "p99": _nearest_rank(vals, 99),
        "count": int(vals.size),
    }


def latency_report(report: RunReport) -> dict:
    return report.latency


# -- synthetic fixtures ------------------------------------------------


def make_synthetic_case(
    name: str,
    num_frames: int = 300,
    num_boundaries: int = 7,
    num_labels: int = 5,
    dim: int = 8,
    seed: int = 0,
    noise: float = 0.08,
    init_shift: int = 8,
) -> Case:
    """A separable fixture: per-label prototype features with a step at
    every ground-truth boundary, and a prelabel whose boundaries are
    shifted by a few frames."""
    rng = np.random.default_rng(seed)
    T = num_frames
    # boundaries with a guaranteed margin
    margin = max(12, T // (4 * (num_boundaries + 1)))
    while True:
        cuts = np.sort(rng.choice(np.arange(margin, T - margin), size=num_boundaries, replace=False))
        if num_boundaries <= 1 or np.diff(cuts).min() > 2 * init_shift + 12:
            break
    labels = []
    prev = -1
    for _ in range(num_boundaries + 1):
        choices = [l for l in range(num_labels) if l != prev]
        prev = int(rng.choice(choices))
        labels.append(prev)
    bounds = [0] + cuts.tolist() + [T]
    segs = tuple((bounds[i], bounds[i + 1], labels[i]) for i in range(len(labels)))
    gt = Segmentation(segments=segs)

    protos = rng.normal(size=(num_labels, dim))
    protos = 4.0 * protos / np.linalg.norm(protos, axis=1, keepdims=True)
    dense = dense_from_segments(gt).labels
    values = protos[dense] + noise * rng.normal(size=(T, dim))
    features = FeatureSequence(values=values.astype(np.float32))

    shifted = []
    lo = 1
    for c in cuts.tolist():
        s = c + int(rng.integers(-init_shift, init_shift + 1))
        s = max(lo, min(s, T - 1))
        shifted.append(s)
        lo = s + 2
    init_dense = np.empty(T, dtype=np.int64)
    bounds_i = [0] + shifted + [T]
    for i, l in enumerate(labels):
        init_dense[bounds_i[i] : bounds_i[i + 1]] = l
    init = segments_from_dense(DenseLabeling(labels=init_dense))

    vocab = LabelVocab(names=tuple(f"action_{i}" for i in range(num_labels)))
    return Case(name=name, features=features, vocab=vocab, gt=gt, init=init)


def make_fixture_set(count: int = 20, seed: int = 0, **kwargs) -> list:
    return [make_synthetic_case(f"case_{i:02d}", seed=seed + i, **kwargs) for i in range(count)]


# -- case directory loading -------------------------------------------


def load_cases(features_dir, labels_dir, init_dir=None) -> list:
    """Pair FTS1 files with label documents by stem."""
    from scribeloop.features import load_features
    from scribeloop.labels import load_labeling

    cases = []
    for fpath in sorted(Path(features_dir).glob("*.fts")):
        stem = fpath.stem
        lpath = Path(labels_dir) / f"{stem}.json"
        if not lpath.exists():
            continue
        vocab, gt = load_labeling(lpath)
        init = None
        if init_dir is not None:
            ipath = Path(init_dir) / f"{stem}.json"
            if ipath.exists():
                _, init = load_labeling(ipath)
        cases.append(Case(name=stem, features=load_features(fpath), vocab=vocab, gt=gt, init=init))
    return cases
