"""Exception and warning types shared across the package."""

import warnings


class OcularError(ValueError):
    """Base class for input errors raised by this package."""


class DegenerateInputError(OcularError):
    """The input carries no usable structure (constant image, flat profile, ...)."""


class NumericalDegeneracyWarning(RuntimeWarning):
    """A result was clamped, floored or regularized to stay in its physical range.

    The CLI turns this warning into exit code 3 when run with ``--strict``.
    """


def flag(message, stacklevel=3):
    warnings.warn(message, NumericalDegeneracyWarning, stacklevel=stacklevel)
