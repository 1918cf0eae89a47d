"""Form Factor image features, eyelid-state correlation filters and saccade tracking."""

from .diagnostics import DegenerateInputError, NumericalDegeneracyWarning, OcularError

__version__ = "0.1.0"

__all__ = ["OcularError", "DegenerateInputError", "NumericalDegeneracyWarning", "__version__"]
