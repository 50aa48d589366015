"""Exception hierarchy shared across the package."""


class GridRobustError(Exception):
    """Base class for all package errors."""


class GridError(GridRobustError, ValueError):
    """Grid description violates a structural invariant."""


class IslandedLoad(GridRobustError):
    """A component cut off from the slack bus still carries injections.

    ``solution`` holds the flows solved on the slack component and
    ``islanded_buses`` the bus ids left without a reference.
    """

    def __init__(self, message, solution=None, islanded_buses=()):
        super().__init__(message)
        self.solution = solution
        self.islanded_buses = tuple(islanded_buses)


class SingularSystem(GridRobustError):
    """Reduced susceptance matrix could not be factored."""


class SchemaError(GridRobustError, ValueError):
    """Malformed chronics or config file."""


class ConsistencyError(GridRobustError, ValueError):
    """Chronics reference ids unknown to the grid, or steps are not uniform."""


class InfeasibleProfile(GridRobustError, ValueError):
    """Generated load profile overflows the intact grid at every step."""


class StepAfterDone(GridRobustError, RuntimeError):
    """``step`` was called on a finished episode."""


class InfeasibleCalibration(GridRobustError, ValueError):
    """No weight decay rate can concentrate the requested mass."""


class ConfigError(GridRobustError, ValueError):
    """Harness configuration is invalid."""
