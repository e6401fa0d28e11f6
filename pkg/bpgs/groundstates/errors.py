import typing as t

from django.core.exceptions import ValidationError
from django.core.management import CommandError


class InvalidArgument(ValidationError):
    """A precondition on a numerical input was violated."""

    def __init__(self, message: str):
        super().__init__(message, code="invalid")

    def __str__(self) -> str:
        return self.messages[0]

    def __reduce__(self):
        return (self.__class__, (self.messages[0],))


class NumericalFailure(Exception):
    """
    A computation did not produce an acceptable result.

    `partial` carries whatever was computed before the failure (a best-so-far
    solve report, the records of an interrupted sweep, ...).
    """

    code = "numerical-failure"

    def __init__(self, message: str, partial: t.Any = None):
        super().__init__(message)
        self.partial = partial


class NoConvergence(NumericalFailure):
    code = "no-convergence"


class DegenerateIterate(NumericalFailure):
    code = "degenerate-iterate"


class CheckFailed(NumericalFailure):
    code = "check-failed"


class UsageError(CommandError):
    """A bad flag or config value; always exits with status 2."""

    code = "usage"

    def __init__(self, message: str):
        super().__init__(message, returncode=2)
