"""Traffic-light classification of the leakage-rate belief."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .belief import BetaParams, beta_cdf, beta_quantile
from .errors import ValidationError


class ColourStatus(enum.IntEnum):
    """Ordered by severity."""

    GREEN = 0
    ORANGE = 1
    RED = 2

    def __str__(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, value: str) -> ColourStatus:
        try:
            return cls[value.upper()]
        except KeyError:
            raise ValidationError(f"unknown colour status {value!r}") from None


@dataclass(frozen=True)
class Thresholds:
    t_risk: float
    t_change: float
    credible_level: float = 0.95

    def __post_init__(self) -> None:
        if not 0.0 < self.t_change < self.t_risk < 1.0:
            raise ValidationError(
                f"need 0 < t_change < t_risk < 1, got t_change={self.t_change}, t_risk={self.t_risk}"
            )
        if not 0.5 < self.credible_level < 1.0:
            raise ValidationError(f"credible_level must lie in (0.5, 1), got {self.credible_level}")

    @classmethod
    def tuned(cls, prior: BetaParams, t_risk: float, credible_level: float = 0.95) -> Thresholds:
        """Thresholds with the change level set at the prior's credible quantile."""
        return cls(t_risk, tune_change_threshold(prior, credible_level), credible_level)


def tune_change_threshold(prior: BetaParams, credible_level: float = 0.95) -> float:
    """The prior's one-sided upper credible bound at ``credible_level``."""
    if not 0.0 < credible_level < 1.0:
        raise ValidationError(f"credible_level must lie in (0, 1), got {credible_level}")
    return beta_quantile(credible_level, prior)


def colour_of(belief: BetaParams, t_change: float, t_risk: float, credible_level: float) -> ColourStatus:
    """Classification without validating the threshold ordering.

    Used where the change level comes from a prior that is itself not low
    risk, so it may sit above ``t_risk``; Green then still requires the
    risk-ceiling condition.  Ties go to the milder colour.
    """
    if beta_cdf(t_risk, belief) < credible_level:
        return ColourStatus.RED
    if beta_cdf(t_change, belief) >= credible_level:
        return ColourStatus.GREEN
    return ColourStatus.ORANGE


def classify(belief: BetaParams, thresholds: Thresholds) -> ColourStatus:
    return colour_of(belief, thresholds.t_change, thresholds.t_risk, thresholds.credible_level)


def assert_low_risk(prior: BetaParams, t_risk: float, credible_level: float = 0.95) -> bool:
    """True when the prior places at least ``credible_level`` of its mass below ``t_risk``."""
    return beta_cdf(t_risk, prior) >= credible_level
