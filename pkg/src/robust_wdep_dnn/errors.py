"""Exception and warning types shared across the package."""


class ShapeError(ValueError):
    """Array dimensions do not match the network architecture."""


class InvalidSpecError(ValueError):
    """A configuration object violates its own constraints."""


class InsufficientDataError(ValueError):
    """An operation received fewer samples than it needs."""


class TooSmallNError(ValueError):
    """Sample size too small for the requested theoretical quantity."""


class DivergenceError(RuntimeError):
    """A simulation or optimization produced non-finite values.

    Carries the step at which the blow-up was detected.
    """

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class VacuousBoundWarning(UserWarning):
    """A complexity bound evaluated to a vacuous (non-informative) value."""


class SmoothnessWarning(UserWarning):
    """Inputs fall outside the smoothness hypothesis of a bound."""


class HypothesisWarning(UserWarning):
    """Inputs fall outside some other hypothesis of a bound."""
