#!/usr/bin/env python3

"""Exception hierarchy shared by every hmlab module."""


class HmlabError(Exception):
    """Base class for all hmlab errors."""

    exit_code = 1


class InvalidParameter(HmlabError, ValueError):
    """A parameter lies outside the documented range."""

    exit_code = 2


class UnknownDomain(InvalidParameter):
    """A domain catalog string could not be parsed."""


class NotStarlike(InvalidParameter):
    """A domain passed to a starlike-only scenario lacks the starlike flag."""


class PointOutsideDomain(HmlabError, ValueError):
    """A point that must lie in the domain does not."""

    exit_code = 2


class SegmentLeavesDomain(HmlabError):
    """A straight segment crosses the boundary of the domain."""

    exit_code = 2


class QuadratureNonConvergence(HmlabError, ArithmeticError):
    """Panel doubling hit its cap before reaching the tolerance."""

    exit_code = 2


class ContextMismatch(HmlabError):
    """Tallies from different (domain, eps) contexts cannot be merged."""

    exit_code = 2


class TooManyTimeouts(HmlabError):
    """More walks hit the step cap than the acceptance threshold allows."""

    exit_code = 4


class InsufficientSamples(HmlabError):
    """An estimate is too noisy to support the requested comparison."""

    exit_code = 4


class ReportWriteError(HmlabError):
    """A report could not be written to its destination."""

    exit_code = 1
