"""Exception types shared across the package.

``PreconditionError`` subclasses signal that a check refused to run (the CLI
maps them to exit status 2); ``ModelFileError`` signals bad input (status 3).
"""


class SublexError(Exception):
    pass


class SizeGuardError(SublexError):
    """An enumeration or construction would exceed the tractability guard."""


class PreconditionError(SublexError):
    """A check's stated precondition failed; the check did not run."""


class NotAdaptedError(PreconditionError):
    """Leaf values are not constant on the atoms of the requested level."""


class NotStepError(PreconditionError):
    """A step variable is not measurable at its own time index."""


class ClassificationError(PreconditionError):
    """A process does not have the class required by an inequality.

    Carries the full classification so callers can report near-misses.
    """

    def __init__(self, message, classification=None):
        super().__init__(message)
        self.classification = classification


class IndependenceError(PreconditionError):
    """A step failed its independence-of-the-past pre-check."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class MeanUncertainError(PreconditionError):
    """The template has upper mean != lower mean; use the cluster diagnostic."""


class DivergenceError(PreconditionError):
    """A required summability condition fails (or trends divergent)."""


class DominationError(PreconditionError):
    """Pointwise domination |X_n| <= Y fails on the quasi-sure support."""

    def __init__(self, message, witness_leaf=None, index=None):
        super().__init__(message)
        self.witness_leaf = witness_leaf
        self.index = index


class ModelFileError(SublexError):
    """A model document failed validation; ``location`` names the field."""

    def __init__(self, message, location=""):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location
