"""Exception hierarchy shared by all pelastica modules."""


class PelasticaError(Exception):
    """Base class for all errors raised by this package."""


class CurveError(PelasticaError):
    """A curve violates a structural requirement (regularity, size, shape)."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class DegeneracyError(PelasticaError):
    """A curvature coefficient blew up where the energy is degenerate."""


class StepSizeUnderflow(PelasticaError):
    """The step controller halved the time step too many times."""

    def __init__(self, message, time=None, dt=None, residual=None):
        super().__init__(message)
        self.time = time
        self.dt = dt
        self.residual = residual


class ConfigError(PelasticaError):
    """Invalid run configuration; ``key`` names the offending entry."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
