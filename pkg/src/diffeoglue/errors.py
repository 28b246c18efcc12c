"""Error taxonomy shared across the library.

Construction-time failures carry enough context (worst point, worst value)
to be reported without re-running the pipeline that raised them.
"""
from __future__ import annotations

import numpy as np


class DiffeoError(Exception):
    """Base class for all library errors."""


class ParameterError(DiffeoError, ValueError):
    """A caller-supplied parameter is out of contract."""


class OrientationError(DiffeoError):
    """A map that must preserve orientation does not (det <= 0)."""


class ConditioningError(DiffeoError):
    """A matrix kernel was asked to work beyond its conditioning budget."""


class NotADiffeomorphismError(DiffeoError):
    """A constructed map fails a bijectivity/orientation certificate."""

    def __init__(self, message: str, worst_point=None, worst_value=None):
        super().__init__(message)
        self.worst_point = None if worst_point is None else np.asarray(worst_point, dtype=float)
        self.worst_value = worst_value


class CompositionError(DiffeoError):
    """A composition stage's image escapes the next stage's domain."""


class GluingError(DiffeoError):
    """Piecewise gluing failed: coverage gap or seam disagreement."""

    def __init__(self, message: str, worst_point=None, worst_value=None):
        super().__init__(message)
        self.worst_point = None if worst_point is None else np.asarray(worst_point, dtype=float)
        self.worst_value = worst_value


class GeometryError(DiffeoError):
    """Requested geometry does not fit (tubes, collars, plateau chains)."""


class MarginError(DiffeoError):
    """A construction ran out of the margin the input map was defined on."""


class LinearizationError(DiffeoError):
    """The local linearization search exhausted its shrinking budget."""


class AutomorphismError(DiffeoError):
    """A map presented as a ball automorphism fails the sampled check."""


class ContainmentError(DiffeoError):
    """A required sampled containment does not hold."""


class SamplingError(DiffeoError):
    """Rejection sampling starved (acceptance rate below budget)."""


class SchemaError(DiffeoError):
    """Scenario text failed validation; carries one message per problem."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class NumericError(DiffeoError):
    """An iterative kernel failed to converge where it was required to."""
