"""Exception types shared by the simulator modules."""


class TwinbeamError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(TwinbeamError, ValueError):
    """A parameter violates a documented bound or invariant."""


class SamplingGuardError(ConfigurationError):
    """Angular-spectrum propagation would alias on the current grid.

    Attributes
    ----------
    distance : float
        Requested propagation distance [m].
    max_distance : float
        Largest |distance| the grid supports [m].
    """

    def __init__(self, distance, max_distance, leg=None):
        self.distance = distance
        self.max_distance = max_distance
        self.leg = leg
        where = f" on leg '{leg}'" if leg else ""
        super().__init__(
            f"propagation distance {distance:.6g} m{where} violates the sampling guard; "
            f"maximum safe distance for this grid is {max_distance:.6g} m"
        )


class GridError(TwinbeamError, ValueError):
    """A position or shift is not representable on the sampling grid."""


class SetupError(TwinbeamError, ValueError):
    """Malformed setup file; carries the line number and offending token."""

    def __init__(self, message, line=None, token=None):
        self.line = line
        self.token = token
        prefix = f"line {line}: " if line is not None else ""
        suffix = f" (offending token: {token!r})" if token is not None else ""
        super().__init__(f"{prefix}{message}{suffix}")
