"""Exception types shared across the package."""


class FhnLifError(Exception):
    """Base class for all package errors."""

    code = "error"


class InvalidArgumentError(FhnLifError, ValueError):
    code = "invalid-argument"


class BlowUpError(FhnLifError, FloatingPointError):
    """A simulated state left the finite / bounded region.

    ``step_index`` is the last step whose state was still finite and
    within the guard radius.
    """

    code = "blow-up"

    def __init__(self, step_index, message=None):
        self.step_index = int(step_index)
        super().__init__(message or f"state blew up after step {self.step_index}")


class NotUniqueFixedPointError(FhnLifError, ValueError):
    code = "not-unique-fixed-point"


class UnsupportedRegimeError(FhnLifError, ValueError):
    code = "unsupported-regime"


class SingularityError(FhnLifError, ValueError):
    code = "singularity"


class FitFailureError(FhnLifError, RuntimeError):
    code = "fit-failure"
