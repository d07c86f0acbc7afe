"""Exception hierarchy.

``NumericalError`` subclasses signal a failed computation (CLI exit code 1);
``ConfigError`` signals invalid user input (CLI exit code 2).
"""


class NumericalError(ArithmeticError):
    pass


class IntegrationError(NumericalError):
    pass


class StepSizeUnderflow(IntegrationError):
    """Step size fell below the floating point resolution of x (stiffness)."""


class NonFiniteCoefficient(IntegrationError):
    pass


class RankCollapse(NumericalError):
    """Propagated basis columns became linearly dependent."""


class FloquetError(NumericalError):
    pass


class SpectralGapError(NumericalError):
    """An eigenvalue sits in the guard band around the imaginary axis."""


class NoHyperbolicDirections(NumericalError):
    pass


class NoLocalMinimum(NumericalError):
    pass


class ResidualError(NumericalError):
    pass


class DecayFitError(NumericalError):
    pass


class QuadratureError(NumericalError):
    """Quadrature did not converge or the truncated tail is too large."""


class ConfigError(ValueError):
    pass
