"""Shared exception types.

Module-specific failures (metric file parsing, grammar errors) live next to
their parsers; the types here cross module boundaries and map onto the CLI's
exit-code contract.
"""


class ParameterError(ValueError):
    """A parameter is outside its documented domain."""


class PreconditionError(ValueError):
    """A documented operation precondition failed (message names both values)."""


class InternalInconsistencyError(AssertionError):
    """A bound that upstream invariants guarantee was violated numerically.

    Seeing this means an input certificate or invariant was corrupted, not
    that the tolerance was merely tight.
    """


class VerificationError(RuntimeError):
    """A construction panel that must pass verification did not."""


class CapabilityRefusal(RuntimeError):
    """A request exceeds a hard resource guard; carries a remediation report."""

    def __init__(self, message: str, report: dict | None = None):
        super().__init__(message)
        self.report = report or {}
