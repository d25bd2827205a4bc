"""Exception taxonomy shared across the package.

Grouped by failure class so the service and CLI can map errors onto the
exit-code contract (0 ok, 2 bad input, 3 invariant violation, 4 privacy).
"""


class PruwError(Exception):
    """Base class for all package errors."""

    error_class = "input"


class InputError(PruwError):
    error_class = "input"


class InvariantError(PruwError):
    error_class = "invariant"


class CompositeModulus(InputError):
    """Requested field modulus is not prime."""


class FieldTooSmall(InputError):
    """Field cannot supply enough pairwise-distinct evaluation constants."""


class InfeasibleCode(InputError):
    """Coding parameter outside the admissible range for the replication count."""


class BadIndex(InputError):
    """Submodel index outside 1..M."""


class DimensionMismatch(InputError):
    """Array shapes disagree with the code parameters."""


class BadNullSet(InputError):
    """Silent-database subset has the wrong size or wrong membership."""


class SingularSystem(InvariantError):
    """Decoding system was singular; cannot happen with valid distinct constants."""


class DegenerateHomogeneous(InputError):
    """Allocation formulas require strictly heterogeneous constraints."""


class InfeasibleAllocation(InputError):
    """Per-database allocation exceeds what R-fold replication can absorb."""


class IndivisibleL(InputError):
    """Submodel length incompatible with the plan's subpacket granularity."""

    def __init__(self, message: str, minimal_l: int):
        super().__init__(message)
        self.minimal_l = minimal_l


class OutOfRange(InputError):
    """Storage fraction outside the plannable range."""


class InvariantViolation(InvariantError):
    """A measured quantity disagrees with its predicted exact value."""
