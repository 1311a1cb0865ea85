"""Exception hierarchy shared by all permlab modules."""


class PermlabError(Exception):
    """Base class for every error raised by permlab."""


class ParseError(PermlabError, ValueError):
    """Malformed permutation text or permuton JSON."""


class SizeLimitError(PermlabError, ValueError):
    """An enumeration would exceed the configured cap."""


class ContractViolation(PermlabError, ValueError):
    """An argument breaks the precondition of the called operation."""


class InternalConsistencyError(PermlabError, RuntimeError):
    """A certified object failed its own structural check."""


class SearchFailure(PermlabError, RuntimeError):
    """A randomized search ran out of budget.

    ``payload`` carries the best diagnostic found so far.
    """

    def __init__(self, message, payload=None):
        super().__init__(message)
        self.payload = payload or {}
