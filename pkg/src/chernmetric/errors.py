"""Exception hierarchy shared by every module."""


class ChernMetricError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(ChernMetricError, ValueError):
    pass


class GapClosure(ChernMetricError, ArithmeticError):
    """The two Dirac levels touch, so the band geometry is singular."""

    def __init__(self, message, d_min=None):
        super().__init__(message)
        self.d_min = d_min


class GapClosureOnGrid(GapClosure):
    """Gap closure at one or more points of an integration grid."""

    def __init__(self, points, d_min=None):
        points = [tuple(float(x) for x in p) for p in points]
        shown = ", ".join(str(p) for p in points[:5])
        more = f" (+{len(points) - 5} more)" if len(points) > 5 else ""
        super().__init__(f"gap closes at {len(points)} grid point(s): {shown}{more}", d_min)
        self.points = points


class MissingJacobian(ChernMetricError, ValueError):
    pass


class GaugeFixFailure(ChernMetricError, ArithmeticError):
    pass


class SingularMetric(ChernMetricError, ArithmeticError):
    pass


class WindowTooNarrow(ChernMetricError, ValueError):
    """Lorentzian mass outside the sampled frequency window is too large."""

    def __init__(self, message, tail_mass=None):
        super().__init__(message)
        self.tail_mass = tail_mass


class ConfigError(ChernMetricError, ValueError):
    pass
