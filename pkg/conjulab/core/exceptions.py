"""
Exception hierarchy. Every error carries the CLI exit code it maps to.
conjulab/core/exceptions.py
"""


class ConjulabError(Exception):
    """Base class for all laboratory errors."""

    exit_code: int = 2


class ConfigurationError(ConjulabError):
    """Scenario file or settings failed validation."""

    exit_code = 2


class IncompatibleVectorsError(ConjulabError):
    """Vectors of different variants or dense dimensions were mixed."""

    exit_code = 2


class NotHyperbolicError(ConjulabError):
    """The operator has no certifiable (generalized) hyperbolic splitting."""

    exit_code = 2


class NotInvertibleError(ConjulabError):
    """The inverse of a non-invertible operator was requested."""

    exit_code = 2


class AdmissibilityError(ConjulabError):
    """A perturbation tuple violates the smallness hypotheses."""

    exit_code = 2


class BudgetInfeasibleError(ConjulabError):
    """The requested tolerance needs more terms or iterations than allowed."""

    exit_code = 3


__all__ = [
    'ConjulabError',
    'ConfigurationError',
    'IncompatibleVectorsError',
    'NotHyperbolicError',
    'NotInvertibleError',
    'AdmissibilityError',
    'BudgetInfeasibleError'
]
