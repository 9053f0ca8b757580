"""Exception and warning types shared across the package."""


class NonCoerciveOperator(ArithmeticError):
    """Conjugate gradients met a direction of non-positive curvature.

    The assembled operator ``-div(K grad) + W q`` is then not positive
    definite, i.e. the first Dirichlet eigenvalue of ``Delta_g - q`` is not
    positive.
    """


class SolverDiverged(RuntimeError):
    """An iterative solve did not reach its tolerance.

    Attributes
    ----------
    history : list of float
        Relative residual per iteration.
    """

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])


class ExtrapolationUnreliable(UserWarning):
    """A sequence used for extrapolation is not monotone or not Cauchy."""


class EmbeddingObstructed(ValueError):
    """The axisymmetric embedding ansatz cannot close: E - (f')^2 <= 0.

    Attributes
    ----------
    interval : tuple of float
        Latitude interval (theta_lo, theta_hi) where the obstruction occurs.
    """

    def __init__(self, message, interval=None):
        super().__init__(message)
        self.interval = interval


class ConfigError(ValueError):
    """Invalid run configuration."""
