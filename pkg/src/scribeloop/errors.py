"""Exception hierarchy for the annotation engine."""


class ScribeloopError(Exception):
    """Base class for all engine errors."""


class FormatError(ScribeloopError):
    """A binary or text artifact does not match its declared format."""


class TruncationError(FormatError):
    """Declared payload size disagrees with actual content."""


class DataError(ScribeloopError):
    """Payload decoded but violates a value invariant (e.g. non-finite)."""


class StructureError(ScribeloopError):
    """A structured object (segmentation, anchor set) violates tiling rules."""


class GestureError(ScribeloopError):
    """Strokes do not contain the gesture required by the requested operation."""


class NumericError(ScribeloopError):
    """Non-finite value observed during inference."""


class TrainingError(ScribeloopError):
    """Training diverged; carries the last finite parameter snapshot."""

    def __init__(self, message, last_good=None):
        super().__init__(message)
        self.last_good = last_good


class ConstraintConflictError(ScribeloopError):
    """Two anchors force conflicting labels at the same frame."""

    def __init__(self, message, anchor_ids=()):
        super().__init__(message)
        self.anchor_ids = tuple(anchor_ids)


class InvariantError(ScribeloopError):
    """An internal postcondition failed (decode/writeback disagreement)."""
