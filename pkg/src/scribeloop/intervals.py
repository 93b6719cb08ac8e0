"""Half-open frame intervals shared across the package."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True, order=True)
class FrameInterval:
    """A half-open range of frame indices [start, end)."""

    start: int
    end: int

    def __post_init__(self):
        if self.end < self.start:
            raise ValueError(f"interval end {self.end} < start {self.start}")

    def __len__(self) -> int:
        return self.end - self.start

    def __contains__(self, t: int) -> bool:
        return self.start <= t < self.end

    @property
    def empty(self) -> bool:
        return self.end <= self.start

    def clip(self, lo: int, hi: int) -> "FrameInterval":
        return FrameInterval(min(max(self.start, lo), hi), min(max(self.end, lo), hi))

    def intersect(self, other: "FrameInterval") -> "FrameInterval":
        s = max(self.start, other.start)
        e = min(self.end, other.end)
        return FrameInterval(s, max(s, e))

    def contains_interval(self, other: "FrameInterval") -> bool:
        return self.start <= other.start and other.end <= self.end
