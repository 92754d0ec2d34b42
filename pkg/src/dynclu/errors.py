"""Exception types shared across the package."""


class DyncluError(Exception):
    """Base class for package-specific errors."""


class InvalidParameter(DyncluError, ValueError):
    """A model or distribution parameter is outside its admissible range."""


class InfiniteMean(InvalidParameter):
    """A lifetime distribution was parameterized with an infinite mean."""


class EdgeProbabilityOverflow(DyncluError, ValueError):
    """Some stationary edge probability d_i d_j / m exceeds one."""

    def __init__(self, i: int, j: int, value: float):
        self.pair = (i, j)
        self.value = value
        super().__init__(
            f"edge probability {value:.12g} > 1 for vertex pair ({i}, {j})"
        )


class IndexOutOfRange(DyncluError, IndexError):
    """Vertex index outside 1..N."""


class QuadratureFailure(DyncluError, ArithmeticError):
    """Numerical integration did not reach the requested tolerance."""

    def __init__(self, message: str, achieved_error: float):
        self.achieved_error = achieved_error
        super().__init__(f"{message} (achieved error {achieved_error:.3g})")


class InversionFailure(DyncluError, ArithmeticError):
    """Numerical CDF inversion failed to bracket the target quantile."""


class DegenerateEdge(DyncluError, ValueError):
    """An edge probability of exactly 0 or 1 makes a sojourn rate degenerate."""


class WrongFamily(DyncluError, TypeError):
    """Operation requested for a lifetime family it does not support."""


class NegativeCovariance(DyncluError, ArithmeticError):
    """A covariance came out negative beyond numerical-noise tolerance."""


class SeriesTooShort(DyncluError, ValueError):
    """Snapshot series has fewer than three observations."""


class SingularJacobian(DyncluError, ArithmeticError):
    """Moment-function Jacobian too ill-conditioned to invert."""


class TooFewRuns(DyncluError, ValueError):
    """Empirical covariance needs at least two runs."""


class SampleTooSmall(DyncluError, ValueError):
    """Statistical test invoked with too few observations."""


class ConfigError(DyncluError, ValueError):
    """Experiment configuration failed validation."""
