"""Exception types shared across the package.

Every numerical failure mode gets its own class so callers (and the CLI
exit-code mapping) can react to the *kind* of breakdown, not a message
string.
"""

from __future__ import annotations


class RenormError(Exception):
    """Base class for all package-specific failures."""


class ConfigError(RenormError):
    """Bad user configuration (unknown key, invalid value, missing input)."""


class PrecisionError(RenormError):
    """A requested tolerance is below what the measurement can resolve."""


class FitError(RenormError):
    """Series fitting failed (non-finite sample, degenerate interval)."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class CompositionRangeError(RenormError):
    """Composition rejected: too many nodes left the flagged range."""

    def __init__(self, message, fraction=None, lo=None, hi=None):
        super().__init__(message)
        self.fraction = fraction
        self.range = (lo, hi)


class SingularInverseError(RenormError):
    """Pointwise inversion hit a near-zero derivative."""


class NotInvertibleError(RenormError):
    """No sign change in the bracket: the target value is not attained."""


class PairConditionError(RenormError):
    """A pair construction invariant failed; `condition` names which one."""

    def __init__(self, condition, message):
        super().__init__(f"condition {condition}: {message}")
        self.condition = condition


class IndexError_(RenormError):
    """Inadmissible multi-index."""


class WordRangeError(RenormError):
    """A composition word left the evaluable range mid-word."""

    def __init__(self, message, position=None):
        super().__init__(message)
        self.position = position


class HeightUnreliableError(RenormError):
    """Height iteration left the trusted range; carries last reliable count."""

    def __init__(self, message, last_reliable):
        super().__init__(message)
        self.last_reliable = last_reliable


class GlueInconsistencyError(RenormError):
    """Glue-map orbit escaped its circle; usually a bad commutation."""


class NotRenormalizableError(RenormError):
    """Height is infinite: the pair cannot be renormalized."""


class PartitionDefectError(RenormError):
    """Dynamical partition has a cover gap or an interior overlap."""

    def __init__(self, message, elements=None):
        super().__init__(message)
        self.elements = elements


class DegenerateProjectionError(RenormError):
    """Projection Newton system is singular (no cubic critical point)."""


class ProjectionDivergedError(RenormError):
    """Projection Newton failed to converge."""


class LeftDomainError(RenormError):
    """Fixed-point iteration changed combinatorics (height) mid-run."""


class TransformSingularError(RenormError):
    """2D coordinate change hit a singular or out-of-range inversion."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class TransformInaccurateError(RenormError):
    """2D coordinate change failed its round-trip validation."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NotOnStableSetError(RenormError):
    """Attractor construction requires the golden-height stable set."""
