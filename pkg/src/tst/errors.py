"""Exception types shared across the package."""


class TstError(Exception):
    """Base class for all package-specific errors."""


class InvalidDyadError(TstError):
    """Self-loop or out-of-range node pair."""


class DimensionError(TstError):
    """Mismatched sizes between graphs, attribute tables, or curves."""


class InvalidDesignError(TstError):
    """Attribute design constraints violated (e.g. group sizes)."""


class EmptySpaceError(TstError):
    """Operation requires a non-empty state space."""


class RegimeNotFoundError(TstError):
    """No sampled state satisfies the requested alignment thresholds."""


class DisconnectedStatesError(TstError):
    """Source and target states are not connected in the observed
    transition structure."""


class NoInteriorError(TstError):
    """Path too short to have interior states."""


class MalformedTrajectoryError(TstError):
    """Trajectory does not connect its declared source and target."""


class AbsorbingStateError(TstError):
    """Total event rate is zero: the process cannot leave the current
    graph."""


class EmptyInputError(TstError):
    """Empty collection where at least one element is required."""


class BudgetExhaustedError(TstError):
    """An iteration budget ran out before the requested work completed.

    Carries whatever partial evidence the caller may want: ``detail`` is a
    dict with operation-specific keys (e.g. ``acceptance_rate``,
    ``partial_trajectory``).
    """

    def __init__(self, message, **detail):
        super().__init__(message)
        self.detail = detail


class ConfigError(TstError):
    """Invalid or unparsable run configuration."""
