"""Correction-driven annotation loop for dense temporal action labeling.

Scribbles on a timeline are encoded into uncertainty-aware channels,
interpreted by a small trainable proposal model, ranked by a cost-aware
query planner, propagated by anchored exact decoding, and fed back into
online adaptation statistics.
"""

from scribeloop.intervals import FrameInterval

__all__ = ["FrameInterval"]
__version__ = "0.1.0"
