class PilotHashError(Exception):
    """Base class for all library errors."""


class ShapeOverflow(PilotHashError):
    pass


class DuplicateKeys(PilotHashError):
    """Two input keys are equal (integer keys hash injectively)."""


class DuplicateHashes(PilotHashError):
    """Two distinct keys share a full fingerprint; recoverable by reseeding."""

    def __init__(self, part):
        super().__init__(f"duplicate hashes in part {part}")
        self.part = part


class PartOversubscribed(PilotHashError):
    def __init__(self, part, size, slots):
        super().__init__(f"part {part} received {size} keys but has only {slots} slots")
        self.part = part


class PartFailed(PilotHashError):
    def __init__(self, part, reason):
        super().__init__(f"part {part} failed: {reason}")
        self.part = part
        self.reason = reason


class BuildFailed(PilotHashError):
    def __init__(self, attempts, last_error=None):
        msg = f"construction failed after {attempts} attempt(s)"
        if last_error is not None:
            msg += f"; last error: {last_error}"
        super().__init__(msg)
        self.attempts = attempts
        self.last_error = last_error


class RangeTooWide(PilotHashError):
    pass


class ValueTooLarge(PilotHashError):
    pass


class FormatError(PilotHashError):
    """Corrupt, truncated, or unsupported serialized index."""
