"""Exception types shared across the package.

Refusals (a certificate attempt that soundly fails) are *return values*,
not exceptions; only genuine input or numerical problems raise.
"""


class MapError(Exception):
    """Base class for all package-specific errors."""


class ParseError(MapError):
    """Syntax error in a map expression.  Carries the offset into the text."""

    def __init__(self, message, position=None):
        if position is not None:
            message = "%s (at offset %d)" % (message, position)
        super().__init__(message)
        self.position = position


class DomainError(MapError):
    """Point or cell outside the map's domain, or an ill-formed domain."""


class PieceError(MapError):
    """Piece list does not partition the domain, or pieces are malformed."""


class PoleError(MapError):
    """Evaluation hit a pole / left the domain of a primitive (tan, log, sqrt,
    division) at a point or somewhere inside an interval cell."""


class GuardError(MapError):
    """Evaluation too close to a critical point for the quantity to be
    meaningful (the Schwarzian blows up like -(3/2)(x-c)^-2 there)."""


class FitError(MapError):
    """A regression-based estimate failed to converge or had too few terms."""


class DensityError(MapError):
    """Invariant-density machinery failed: degenerate (non-mixing) transfer
    operator, mismatched bin grids, or an input that is not close enough to
    invariant for the requested construction."""
