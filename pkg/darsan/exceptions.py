"""
Custom exceptions for the DARSAN review engine and simulator
"""

from typing import Optional


class DarsanError(Exception):
    """Base exception for the review engine, simulator and harness"""

    pass


class ArgumentError(DarsanError):
    """Raised when an operation receives an invalid argument"""

    pass


class RangeError(ArgumentError):
    """Raised when a rating, review or prediction falls outside [0, 1]"""

    pass


class DegenerateInputError(DarsanError):
    """Raised when a weighted mean has no positive weight to work with"""

    pass


class ConfigError(DarsanError):
    """Raised when a configuration is invalid or cannot be satisfied"""

    pass


class ProtocolError(DarsanError):
    """Base exception for operations the round state machine rejects"""

    pass


class StateError(ProtocolError):
    """Raised when an operation is invoked in the wrong asset state"""

    pass


class AuthorizationError(ProtocolError):
    """Raised when a reviewer is not allowed to perform an operation"""

    pass


class DuplicateError(ProtocolError):
    """Raised when a reviewer submits the same kind of input twice"""

    pass


class DuplicateRoundError(DuplicateError):
    """Raised when an asset is submitted while its round is still open"""

    pass


class DuplicateEndorsementError(DuplicateError):
    """Raised when a reviewer endorses more than once per asset"""

    pass


class SelfEndorsementError(ProtocolError):
    """Raised when a reviewer endorses their own review"""

    pass


class MissingReviewError(ProtocolError):
    """Raised when the endorsed reviewer has not submitted a review"""

    pass


class LogIntegrityError(DarsanError):
    """Raised when an event log fails hash-chain verification"""

    def __init__(self, index: int, reason: str):
        self.index = index
        self.reason = reason
        super().__init__(f"Event log corrupt at index {index}: {reason}")


class ReportError(DarsanError):
    """Raised when harness outputs are missing or incomplete"""

    def __init__(self, message: str, missing: Optional[list] = None):
        self.missing = list(missing or [])
        super().__init__(message)
