"""Exception types raised across the package.

The CLI reports runtime failures by class name, so each failure mode gets
its own type.
"""


class CVaRLabError(Exception):
    """Base class for all package errors."""


class InfiniteCVaR(CVaRLabError):
    """Tail expectation diverges for the requested distribution."""


class NoFiniteMoment(CVaRLabError):
    """No moment order p in (1, 2] is finite."""


class InsufficientSamples(CVaRLabError):
    """Too few samples for the requested risk level."""


class InvalidDelta(CVaRLabError, ValueError):
    """Confidence parameter outside (0, 1)."""


class Unachievable(CVaRLabError):
    """Target probability cannot be reached by any sample count."""


class BudgetTooSmall(CVaRLabError):
    """Bandit budget cannot support the elimination schedule."""


class DegenerateGaps(CVaRLabError):
    """All CVaR gaps are zero, hardness is undefined."""


class TooFewPoints(CVaRLabError):
    """Not enough usable curve points for a regression fit."""


class IOFailure(CVaRLabError, OSError):
    """Result or input file could not be read or written."""
