"""Exception types shared across the package."""


class LowRiskError(Exception):
    """Base class for domain errors raised by this package."""

    exit_code = 1


class ValidationError(LowRiskError, ValueError):
    """Malformed counts, thresholds, schedules or spec files."""

    exit_code = 2


class NotLowRisk(LowRiskError):
    """The prior belief does not place 95% (or the chosen level) below the risk ceiling.

    Sizing is undefined for such a pathway: the high-risk subpathway's data
    has to be separated out before the method can be applied again.
    """

    exit_code = 3


class RedStatus(LowRiskError):
    """The current belief is Red, so no minimum sample size can be recommended."""

    exit_code = 3


class NoSolution(LowRiskError):
    """No sample size up to the configured cap reaches the target."""

    exit_code = 4
