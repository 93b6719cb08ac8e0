"""Label vocabularies, dense labelings, segmentations, and the
evaluation metrics (boundary F1 at a frame tolerance, edit score)."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from scribeloop.errors import StructureError


@dataclass(frozen=True)
class LabelVocab:
    names: tuple

    def __post_init__(self):
        names = tuple(self.names)
        if len(names) < 1:
            raise ValueError("vocabulary must contain at least one label")
        if len(set(names)) != len(names):
            raise ValueError("vocabulary contains duplicate names")
        object.__setattr__(self, "names", names)

    @property
    def size(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)


@dataclass(frozen=True)
class DenseLabeling:
    """Length-T vector of label indices."""

    labels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.labels, dtype=np.int64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("dense labeling must be a non-empty 1-D vector")
        if arr.min() < 0:
            raise ValueError("negative label index")
        arr.setflags(write=False)
        object.__setattr__(self, "labels", arr)

    def __len__(self) -> int:
        return int(self.labels.shape[0])


@dataclass(frozen=True)
class Segmentation:
    """Ordered (start, end, label) triples tiling [0, T) with half-open
    spans; adjacent segments carry distinct labels."""

    segments: tuple

    def __post_init__(self):
        segs = tuple((int(s), int(e), int(l)) for s, e, l in self.segments)
        if not segs:
            raise StructureError("segmentation must be non-empty")
        if segs[0][0] != 0:
            raise StructureError("first segment must start at frame 0")
        for i, (s, e, l) in enumerate(segs):
            if e <= s:
                raise StructureError(f"segment {i} is empty or inverted")
            if i > 0:
                if s != segs[i - 1][1]:
                    raise StructureError(f"gap/overlap before segment {i}")
                if l == segs[i - 1][2]:
                    raise StructureError(f"adjacent segments {i-1},{i} share a label")
        object.__setattr__(self, "segments", segs)

    @property
    def num_frames(self) -> int:
        return self.segments[-1][1]

    def boundaries(self) -> "BoundarySet":
        return BoundarySet(times=tuple(s for s, _, _ in self.segments[1:]))

    def label_sequence(self) -> tuple:
        return tuple(l for _, _, l in self.segments)


@dataclass(frozen=True)
class BoundarySet:
    """Sorted interior boundary frames (start frame of each non-first
    segment)."""

    times: tuple

    def __post_init__(self):
        times = tuple(int(t) for t in self.times)
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("boundary times must be strictly increasing")
        if any(t <= 0 for t in times):
            raise ValueError("interior boundaries must be > 0")
        object.__setattr__(self, "times", times)

    def __len__(self) -> int:
        return len(self.times)


def segments_from_dense(y: DenseLabeling) -> Segmentation:
    """Maximal runs of equal labels."""
    arr = y.labels
    change = np.flatnonzero(arr[1:] != arr[:-1]) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change, [arr.size]))
    return Segmentation(segments=tuple((int(s), int(e), int(arr[s])) for s, e in zip(starts, ends)))


def dense_from_segments(s: Segmentation) -> DenseLabeling:
    """Inverse of segments_from_dense."""
    out = np.empty(s.num_frames, dtype=np.int64)
    for a, b, l in s.segments:
        out[a:b] = l
    return DenseLabeling(labels=out)


def boundary_f1(pred: BoundarySet, gt: BoundarySet, delta: int) -> float:
    """F1 of a maximum one-to-one matching with |t_p - t_g| <= delta.

    Greedy in-order matching on the two sorted sequences attains the
    maximum for a uniform 1-D tolerance. Both empty -> 1, one empty -> 0.
    """
    if delta < 0:
        raise ValueError("delta must be >= 0")
    p, g = pred.times, gt.times
    if not p and not g:
        return 1.0
    if not p or not g:
        return 0.0
    i = j = matched = 0
    while i < len(p) and j < len(g):
        if abs(p[i] - g[j]) <= delta:
            matched += 1
            i += 1
            j += 1
        elif p[i] < g[j]:
            i += 1
        else:
            j += 1
    return 2.0 * matched / (len(p) + len(g))


def levenshtein(a: Sequence, b: Sequence) -> int:
    """Unit-cost edit distance."""
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def edit_score(pred: Segmentation, gt: Segmentation) -> float:
    """1 - normalized Levenshtein distance over segment-label sequences."""
    a, b = pred.label_sequence(), gt.label_sequence()
    return 1.0 - levenshtein(a, b) / max(len(a), len(b))


def interaction_budget(gt: Segmentation, mult: float = 1.5) -> int:
    """Budget of accepted corrections: ceil(mult * interior boundary count)."""
    return math.ceil(mult * len(gt.boundaries()))


def load_labeling(path) -> tuple:
    """Read a {"vocab": [...], "segments": [{start, end, label}]} document.

    Returns (LabelVocab, Segmentation) with label names resolved to
    vocabulary indices; spans are half-open [start, end).
    """
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    vocab = LabelVocab(names=tuple(doc["vocab"]))
    segs = tuple(
        (int(s["start"]), int(s["end"]), vocab.index(s["label"])) for s in doc["segments"]
    )
    return vocab, Segmentation(segments=segs)


def save_labeling(path, vocab: LabelVocab, seg: Segmentation) -> None:
    doc = {
        "vocab": list(vocab.names),
        "segments": [
            {"start": s, "end": e, "label": vocab.names[l]} for s, e, l in seg.segments
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2), encoding="utf-8")
