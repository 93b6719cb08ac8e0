"""Per-frame feature sequences: FTS1 file I/O and boundary-energy signals.

Features are precomputed dense embeddings (one row per frame) and are
immutable after load; every downstream component reads from the same
matrix.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from scribeloop.errors import DataError, FormatError, TruncationError
from scribeloop.intervals import FrameInterval

FTS1_MAGIC = b"FTS1"
FTS1_VERSION = 1


@dataclass(frozen=True)
class FeatureSequence:
    """T x D matrix of per-frame embeddings, row-major per frame."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float32)
        if v.ndim != 2:
            raise DataError(f"feature matrix must be 2-D, got shape {v.shape}")
        if v.shape[0] < 2 or v.shape[1] < 1:
            raise DataError(f"need T >= 2 and D >= 1, got shape {v.shape}")
        if not np.isfinite(v).all():
            raise DataError("feature matrix contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def num_frames(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class EnergySignal:
    """Min-max normalized first-difference magnitude over a window."""

    values: np.ndarray
    window: FrameInterval = field(default=None)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.min(initial=0.0) < 0.0 or v.max(initial=0.0) > 1.0:
            raise DataError("energy values must lie in [0, 1]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


def load_features(path) -> FeatureSequence:
    """Read an FTS1 feature file (see write_features for the layout)."""
    raw = Path(path).read_bytes()
    if len(raw) < 16:
        raise FormatError(f"{path}: file too short for an FTS1 header")
    magic = raw[:4]
    if magic != FTS1_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    version, T, D = struct.unpack_from("<III", raw, 4)
    if version != FTS1_VERSION:
        raise FormatError(f"{path}: unsupported FTS1 version {version}")
    payload = raw[16:]
    expected = T * D * 4
    if len(payload) != expected:
        raise TruncationError(
            f"{path}: declared T={T} D={D} needs {expected} bytes, found {len(payload)}"
        )
    values = np.frombuffer(payload, dtype="<f4").reshape(T, D)
    if not np.isfinite(values).all():
        raise DataError(f"{path}: non-finite feature value")
    return FeatureSequence(values=values)


def write_features(path, f: FeatureSequence) -> None:
    """Write magic 'FTS1', u32 version, u32 T, u32 D, then little-endian
    float32 values row-major. No padding, no checksum."""
    header = FTS1_MAGIC + struct.pack("<III", FTS1_VERSION, f.num_frames, f.dim)
    body = np.ascontiguousarray(f.values, dtype="<f4").tobytes()
    Path(path).write_bytes(header + body)


def window_slice(f: FeatureSequence, w: FrameInterval) -> FeatureSequence:
    """Rows of f inside w; D unchanged."""
    if w.start < 0 or w.end > f.num_frames or w.empty:
        raise ValueError(f"window {w} out of range for T={f.num_frames}")
    return FeatureSequence(values=f.values[w.start : w.end].copy())


def boundary_energy(f: FeatureSequence, window: FrameInterval) -> EnergySignal:
    """L2 norm of per-frame first differences, min-max normalized over
    the window.

    The first frame of the window has energy 0 (no left neighbor inside
    the window); a constant window yields all zeros.
    """
    if window.start < 0 or window.end > f.num_frames:
        raise ValueError(f"window {window} out of range for T={f.num_frames}")
    if len(window) < 2:
        raise ValueError("boundary energy needs a window of at least 2 frames")
    block = f.values[window.start : window.end].astype(np.float64)
    raw = np.zeros(len(window), dtype=np.float64)
    raw[1:] = np.linalg.norm(np.diff(block, axis=0), axis=1)
    lo, hi = raw.min(), raw.max()
    if hi - lo <= 0.0:
        return EnergySignal(values=np.zeros_like(raw), window=window)
    return EnergySignal(values=(raw - lo) / (hi - lo), window=window)
