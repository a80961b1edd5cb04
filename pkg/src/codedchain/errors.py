"""Exception hierarchy shared by every codedchain module."""

from __future__ import annotations


class CodedChainError(Exception):
    """Base class for all errors raised by this package."""


class InvalidGeometry(CodedChainError):
    pass


class GenerationFailure(CodedChainError):
    pass


class MalformedEncoding(CodedChainError):
    pass


class DimensionMismatch(CodedChainError):
    pass


class ElementOutOfRange(CodedChainError):
    pass


class BlockTooLarge(CodedChainError):
    pass


class CorruptLayout(CodedChainError):
    pass


class InvalidDegree(CodedChainError):
    pass


class RankDeficient(CodedChainError):
    """Fewer than k linearly independent coded fragments were supplied."""

    def __init__(self, rank: int, k: int):
        super().__init__(f"rank {rank} < k={k}; fetch more coded fragments")
        self.rank = rank
        self.k = k


class ManifestMismatch(CodedChainError):
    pass


class ManifestUnavailable(CodedChainError):
    pass


class NotStored(CodedChainError):
    pass


class PeerUnresponsive(CodedChainError):
    pass


class RecoveryFailed(CodedChainError):
    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace


class UnsolvableScenario(CodedChainError):
    pass


class TamperedTrace(CodedChainError):
    pass


class InvalidArgument(CodedChainError, ValueError):
    pass


class InvalidSuite(CodedChainError):
    pass
