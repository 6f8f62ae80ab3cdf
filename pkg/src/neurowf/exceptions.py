"""Exception types raised by neurowf."""


class InvalidInput(ValueError):
    """Input data violates a precondition of the called routine."""


class SingularCovariance(InvalidInput):
    """Covariate covariance matrix cannot be inverted."""


class RankDeficient(InvalidInput):
    """Design matrix of a least-squares fit does not have full column rank."""


class InsufficientData(InvalidInput):
    """Not enough subjects (or classes) to fit a model."""
