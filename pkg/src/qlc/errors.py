"""Shared exception types.

Every domain error raised by this package derives from :class:`QlcError`,
so callers (and the CLI) can distinguish "the computation told you no"
from programming errors.  Specific subclasses live next to the code that
raises them; only the ones used across modules are defined here.
"""


class QlcError(Exception):
    """Base class for all domain errors raised by this package."""


class PreconditionError(QlcError):
    """An operation was called on inputs outside its stated domain."""
