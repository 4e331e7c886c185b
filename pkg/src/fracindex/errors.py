"""Exception hierarchy shared by all modules."""


class FracIndexError(Exception):
    """Base class for every domain error raised by the package."""


class OutOfChart(FracIndexError, ValueError):
    pass


class AnalyticUnavailable(FracIndexError):
    """No closed form exists for the requested quantity on this space."""


class NoCircleFactor(FracIndexError):
    pass


class CoincidentPoints(FracIndexError, ValueError):
    pass


class InvalidConfiguration(FracIndexError, ValueError):
    pass


class DegenerateOffset(FracIndexError, ValueError):
    pass


class EigenFailure(FracIndexError):
    pass


class BudgetExhausted(FracIndexError):
    pass


class NotCritical(FracIndexError):
    pass


class DirectionNotPerpendicular(FracIndexError, ValueError):
    pass


class NoPositivityFound(FracIndexError):
    pass


class GNotFailing(FracIndexError):
    """Condition (G) holds, so the perturbation witness does not apply."""


class WaistNotMinimal(GNotFailing):
    pass


class DegenerateChart(FracIndexError, ValueError):
    pass


class Disconnected(FracIndexError):
    pass


class NoConvergence(FracIndexError):
    pass


class ExcessClipping(FracIndexError):
    """Covariance had too much negative spectral mass to be a valid covariance."""

    def __init__(self, clipped, trace):
        self.clipped = clipped
        self.trace = trace
        super().__init__(
            f"clipped eigenvalue mass {clipped:.3e} exceeds 1e-6 x trace ({trace:.3e})"
        )


class TooFewSamples(FracIndexError, ValueError):
    pass
