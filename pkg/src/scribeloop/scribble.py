"""Uncertainty-aware scribble encoding.

Canvas strokes are projected onto the time axis, classified by gesture
(broad horizontal = uncertain boundary, tall vertical = edit cue, wide
over several hypothesis boundaries = merged correction), and converted
into a 3-channel support signal over a local window together with the
induced uncertain interval.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from scribeloop.errors import GestureError
from scribeloop.intervals import FrameInterval
from scribeloop.labels import BoundarySet, Segmentation

CONTEXT_RADIUS = 32  # frames added on each side of the scribble support
WIDE_RATIO = 2.0  # aspect ratio at or above which a stroke reads as horizontal
TALL_RATIO = 0.5  # aspect ratio at or below which a stroke reads as vertical

CH_UNCERTAIN, CH_LEFT, CH_RIGHT = 0, 1, 2


class GestureKind(enum.Enum):
    UNCERTAIN_BOUNDARY = "uncertain_boundary"
    EDIT_CUE = "edit_cue"
    MULTI_BOUNDARY = "multi_boundary"


@dataclass(frozen=True)
class Stroke:
    """Ordered canvas samples; t is the frame index the client mapped
    each sample to."""

    points: tuple  # of (x, y, t)

    def __post_init__(self):
        pts = tuple((float(x), float(y), int(t)) for x, y, t in self.points)
        if len(pts) < 2:
            raise ValueError("a stroke needs at least 2 points")
        object.__setattr__(self, "points", pts)

    @property
    def t_values(self) -> tuple:
        return tuple(p[2] for p in self.points)

    def aspect_ratio(self) -> float:
        """Horizontal canvas extent over vertical canvas extent."""
        xs = [p[0] for p in self.points]
        ys = [p[1] for p in self.points]
        width = max(xs) - min(xs)
        height = max(ys) - min(ys)
        if height <= 0.0:
            return float("inf")
        return width / height


@dataclass(frozen=True)
class ScribbleEncoding:
    window: FrameInterval
    channels: np.ndarray  # 3 x |W|, binary supports
    uncertain_interval: FrameInterval
    gesture: GestureKind
    covered_boundaries: tuple = ()  # hypothesis boundaries under a multi gesture

    def __post_init__(self):
        ch = np.asarray(self.channels, dtype=np.float64)
        if ch.shape != (3, len(self.window)):
            raise ValueError(f"channels must be 3 x {len(self.window)}, got {ch.shape}")
        if ch.min() < 0.0 or ch.max() > 1.0:
            raise ValueError("channel values must lie in [0, 1]")
        if self.uncertain_interval.empty:
            raise ValueError("uncertain interval must be non-empty")
        if not self.window.contains_interval(self.uncertain_interval):
            raise ValueError("uncertain interval must lie inside the window")
        ch.setflags(write=False)
        object.__setattr__(self, "channels", ch)


def project_stroke(stroke: Stroke, T: int) -> FrameInterval:
    """Inclusive frame range covered by the stroke's points, clipped to
    [0, T); a stroke entirely outside the video is rejected."""
    ts = stroke.t_values
    support = FrameInterval(min(ts), max(ts) + 1).clip(0, T)
    if support.empty:
        raise ValueError(f"stroke support {min(ts)}..{max(ts)} lies outside [0, {T})")
    return support


def project_strokes(strokes, T: int) -> list:
    if not strokes:
        raise ValueError("no strokes given")
    return [project_stroke(s, T) for s in strokes]


def classify_gesture(
    strokes, T: int, hypothesis_boundaries: Optional[BoundarySet] = None
) -> GestureKind:
    """Gesture of a stroke set from aspect ratio and boundary coverage.

    Ambiguous ratios in (TALL_RATIO, WIDE_RATIO) default to an uncertain
    boundary gesture; a wide gesture spanning >= 2 hypothesis boundaries
    becomes a merged multi-boundary correction.
    """
    supports = project_strokes(strokes, T)
    ratios = [s.aspect_ratio() for s in strokes]
    if all(r <= TALL_RATIO for r in ratios):
        return GestureKind.EDIT_CUE
    hull = FrameInterval(min(s.start for s in supports), max(s.end for s in supports))
    if hypothesis_boundaries is not None:
        covered = [t for t in hypothesis_boundaries.times if t in hull]
        if len(covered) >= 2:
            return GestureKind.MULTI_BOUNDARY
    return GestureKind.UNCERTAIN_BOUNDARY


def make_window(support: FrameInterval, T: int, radius: int = CONTEXT_RADIUS) -> FrameInterval:
    """Expand the support by the context radius and clip to [0, T)."""
    if support.empty:
        raise ValueError("empty support")
    return FrameInterval(max(0, support.start - radius), min(T, support.end + radius))


def encode_use(
    strokes, T: int, hypothesis: Optional[Segmentation] = None
) -> ScribbleEncoding:
    """Build the 3-channel encoding from a stroke set.

    Channel 0 is 1 exactly on the uncertain interval (the union hull of
    the uncertain strokes' supports); strokes lying to the left/right
    fill channels 1/2 on their supports minus the uncertain interval.
    """
    supports = project_strokes(strokes, T)
    ratios = [s.aspect_ratio() for s in strokes]
    horizontal = [(sup, r) for sup, r in zip(supports, ratios) if r > TALL_RATIO]
    if not horizontal:
        raise GestureError("no uncertain-boundary stroke present (edit cues are handled elsewhere)")

    # The widest horizontal stroke carries the uncertain interval; the
    # remaining horizontal strokes are one-sided refinement evidence.
    iplus = max(horizontal, key=lambda sr: (len(sr[0]), -sr[0].start))[0]
    hull = FrameInterval(min(s.start for s in supports), max(s.end for s in supports))
    window = make_window(hull, T)

    boundaries = hypothesis.boundaries() if hypothesis is not None else None
    covered = tuple(t for t in boundaries.times if t in iplus) if boundaries else ()
    gesture = (
        GestureKind.MULTI_BOUNDARY if len(covered) >= 2 else GestureKind.UNCERTAIN_BOUNDARY
    )

    channels = np.zeros((3, len(window)), dtype=np.float64)
    channels[CH_UNCERTAIN, iplus.start - window.start : iplus.end - window.start] = 1.0

    iplus_mid = (iplus.start + iplus.end) / 2.0
    for sup, r in zip(supports, ratios):
        if r <= TALL_RATIO:
            continue  # vertical flick mixed in; not side evidence
        if sup == iplus:
            continue
        mid = (sup.start + sup.end) / 2.0
        channel = CH_LEFT if mid < iplus_mid else CH_RIGHT
        clipped = sup.intersect(window)
        for t in range(clipped.start, clipped.end):
            if t not in iplus:  # side channels stay disjoint from the uncertain interval
                channels[channel, t - window.start] = 1.0

    return ScribbleEncoding(
        window=window,
        channels=channels,
        uncertain_interval=iplus,
        gesture=gesture,
        covered_boundaries=covered,
    )
