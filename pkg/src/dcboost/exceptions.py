"""Exception and warning types shared across the package."""

__all__ = (
    "DcError",
    "NumericalError",
    "LineSearchError",
    "EvaluationOverflow",
    "GenerationError",
    "SchemaError",
    "TheoryWarning",
    "SchemaWarning",
)


class DcError(Exception):
    """Base class for solver-level failures."""


class NumericalError(DcError):
    """A linear solve or inner minimization could not be completed reliably."""


class LineSearchError(DcError):
    """A line search exhausted its backtracking budget without acceptance."""


class EvaluationOverflow(DcError):
    """An objective evaluation would overflow (exponent guard tripped).

    Line searches treat this as a rejected trial point; it only escapes to
    the caller when raised at an accepted iterate.
    """

    def __init__(self, max_exponent, limit):
        self.max_exponent = float(max_exponent)
        self.limit = float(limit)
        super().__init__(
            f"exponent {self.max_exponent:.3g} exceeds overflow guard {self.limit:.3g}"
        )


class GenerationError(DcError):
    """The network generator could not satisfy its structural constraints."""


class SchemaError(DcError):
    """A model file failed structural validation.

    Carries the offending field name so CLI output can point at it.
    """

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class TheoryWarning(UserWarning):
    """A configuration leaves the convergence guarantees unsupported."""


class SchemaWarning(UserWarning):
    """A model is structurally valid but violates a soft modelling convention."""
