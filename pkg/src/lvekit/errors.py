"""Exception types shared by every module.

The CLI maps each family onto a distinct exit status, so library code should
raise the most specific class that applies.
"""

from __future__ import annotations


class LvekitError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class DomainError(LvekitError, ValueError):
    """An input violates a documented precondition."""

    exit_code = 3


class ConnectivityError(DomainError):
    """A graph that must be connected is not."""


class StructureError(DomainError):
    """A combinatorial object (colored tree, face structure) is malformed."""


class SizeLimitError(LvekitError):
    """A factorial/exponential-cost guard was exceeded.

    Pass ``accept_exponential_cost=True`` to the operation to lift the guard.
    """

    exit_code = 4


class NumericError(LvekitError, ArithmeticError):
    """A quadrature or fit failed to reach its target accuracy."""

    exit_code = 5

    def __init__(self, message: str, achieved: float | None = None):
        super().__init__(message)
        self.achieved = achieved


class SingularityError(LvekitError, ZeroDivisionError):
    """Evaluation hit a pole or a singular operator."""

    exit_code = 6


class NumericWarning(UserWarning):
    """Budget exhausted before the requested precision was reached."""


def check_size(value: int, limit: int, what: str, accept_exponential_cost: bool = False) -> None:
    if value > limit and not accept_exponential_cost:
        raise SizeLimitError(
            f"{what}={value} exceeds the desk-scale limit {limit}; "
            "pass accept_exponential_cost=True to override"
        )
