"""Exception types shared across the package."""


class EnumerationCapError(ValueError):
    """Raised when an exact-enumeration path would exceed its size cap."""


class ZeroProbabilityConditionError(ValueError):
    """Raised when a conditional query conditions on a zero-probability event."""


class NonConcaveObjectiveError(RuntimeError):
    """Raised when a best-response objective fails its concavity witness.

    Indicates either a learning rate outside the concavity regime or an
    implementation fault; it should never fire inside the valid regime.
    """
