"""Exception hierarchy shared by all memexplorer modules."""


class MemExplorerError(Exception):
    """Base class for every error raised by memexplorer."""


class CatalogParseError(MemExplorerError):
    """The catalog document is malformed or misses a field."""


class CatalogValidationError(MemExplorerError):
    """A catalog entry violates a technology invariant."""


class DomainError(MemExplorerError):
    """An operation was applied to an input outside its domain."""


class InfeasibleBandwidthError(MemExplorerError):
    """Effective bandwidth at some boundary is not strictly positive."""

    def __init__(self, boundary, value):
        self.boundary = boundary
        self.value = value
        super().__init__(
            f"effective bandwidth at boundary {boundary} is {value:.6g} B/s (must be > 0)"
        )


class CapacityExceededError(MemExplorerError):
    """The data footprint does not fit in the hierarchy."""

    def __init__(self, required, available):
        self.required = required
        self.available = available
        self.shortfall = required - available
        super().__init__(
            f"footprint {required / 1e9:.3f} GB exceeds capacity "
            f"{available / 1e9:.3f} GB (shortfall {self.shortfall / 1e9:.3f} GB)"
        )


class InfeasibleDecodeError(MemExplorerError):
    """Decode cannot run: not even one sequence fits next to the weights."""


class ContractViolation(MemExplorerError):
    """An input breaks an operation's precondition."""


class EncodingError(MemExplorerError):
    """A design point lies outside the design-space domains."""


class SearchSpaceError(MemExplorerError):
    """Not enough feasible configurations could be found."""


class SpaceExhausted(MemExplorerError):
    """No unevaluated feasible configuration is left to propose."""


class NumericalError(MemExplorerError):
    """A linear-algebra step failed even after jitter escalation."""


class UnsupportedError(MemExplorerError):
    """The requested variant is not implemented (e.g. more than two objectives)."""
