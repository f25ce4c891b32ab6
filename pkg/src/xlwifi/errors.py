"""Shared exception types."""


class UndefinedMcs(ValueError):
    """Requested (standard, bandwidth, MCS, n_ss) cell does not exist."""


class OversizeMsdu(ValueError):
    """MSDU exceeds the maximum the standard can frame."""


class InvalidPartition(ValueError):
    """Block count does not tile the bonded channel set."""


class RankDeficient(ValueError):
    """Channel matrix is too ill-conditioned to invert."""


class NoNullSpace(ValueError):
    """Stacked interference matrix leaves no null space for this user."""


class DegenerateProduct(ValueError):
    """Projected per-user channel has no usable rank."""


class NonFinite(ValueError):
    """Input contains NaN or infinity."""


class StreamOverflow(ValueError):
    """Total spatial streams exceed the supported maximum."""


class SchedulingFault(RuntimeError):
    """An event was scheduled in the past."""


class ConfigError(ValueError):
    """Scenario configuration error, carrying the offending field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
