"""Baseline sizing policies the adaptive method is compared against.

``fixed_detection_size`` is the classical detection design: the smallest
sample giving a ``confidence`` chance of at least one detection when the
contamination rate equals ``detection_level`` (598 for 0.5% / 95%, usually
rounded up to 600).

``power_analysis_size`` is a surrogate for a risk-cutoff power analysis.  It
tests H0: r >= cutoff, rejecting when the period's count is at most ``c``
(the largest count with Binomial(n, cutoff) CDF <= alpha), and picks the
smallest ``n`` whose power reaches ``power`` at the posterior-mean rate of
the prior window.  It is a documented stand-in, not a reproduction of any
published algorithm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import stats
from scipy.special import ndtr, ndtri

from .belief import EvidenceWindow
from .errors import NoSolution, NotLowRisk, ValidationError

Rounding = Literal["exact", "round_to_600"]

_BLOCK = 8192


@dataclass(frozen=True)
class FixedDesign:
    detection_level: float = 0.005
    confidence: float = 0.95
    rounding: Rounding = "exact"

    def __post_init__(self) -> None:
        if not 0.0 < self.detection_level < 1.0 or not 0.0 < self.confidence < 1.0:
            raise ValidationError("detection_level and confidence must lie in (0, 1)")
        if self.rounding not in ("exact", "round_to_600"):
            raise ValidationError(f"unknown rounding {self.rounding!r}")


@dataclass(frozen=True)
class PowerDesign:
    cutoff: float = 0.005
    alpha: float = 0.05
    power: float = 0.95
    cap: int = 1_000_000

    def __post_init__(self) -> None:
        for name in ("cutoff", "alpha", "power"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValidationError(f"{name} must lie in (0, 1), got {v}")


def fixed_detection_size(design: FixedDesign = FixedDesign()) -> int:
    if design.rounding == "round_to_600":
        return 600
    miss = 1.0 - design.detection_level
    n = max(1, math.ceil(math.log1p(-design.confidence) / math.log(miss)))
    # guard the ceiling against rounding in the logarithms
    while n > 1 and 1.0 - miss ** (n - 1) >= design.confidence:
        n -= 1
    while 1.0 - miss**n < design.confidence:
        n += 1
    return n


def _power_block(ns: np.ndarray, cutoff: float, alpha: float, rate: float, mode: str) -> np.ndarray:
    """Power at ``rate`` for each sample size in ``ns`` (NaN where no count is rejectable)."""
    if mode == "exact":
        c = stats.binom.ppf(alpha, ns, cutoff)
        # ppf gives the smallest c with CDF >= alpha; step down where CDF overshoots
        over = stats.binom.cdf(c, ns, cutoff) > alpha
        c = np.where(over, c - 1, c)
        pw = stats.binom.cdf(c, ns, rate)
    else:
        sd0 = np.sqrt(ns * cutoff * (1.0 - cutoff))
        c = np.floor(ns * cutoff + ndtri(alpha) * sd0)
        sd1 = np.sqrt(ns * rate * (1.0 - rate))
        with np.errstate(divide="ignore", invalid="ignore"):
            pw = np.where(sd1 > 0, ndtr((c - ns * rate) / sd1), (c >= ns * rate).astype(float))
    return np.where(c >= 0, pw, np.nan)


def power_analysis_size(
    prior_window: EvidenceWindow, design: PowerDesign = PowerDesign(), mode: str = "exact"
) -> int:
    """Smallest n whose level-``alpha`` test of r >= cutoff has the requested power."""
    if mode not in ("exact", "normal"):
        raise ValidationError(f"mode must be 'exact' or 'normal', got {mode!r}")
    if not prior_window.batches:
        raise ValidationError("the power analysis needs a non-empty prior window")
    rate = (prior_window.n_contaminated + 0.5) / (prior_window.n_inspected + 1.0)
    if rate >= design.cutoff:
        raise NotLowRisk(
            f"estimated rate {rate:.6g} is not below the cutoff {design.cutoff:g}; "
            "the power target is unreachable"
        )
    start = 1
    while start <= design.cap:
        ns = np.arange(start, min(start + _BLOCK, design.cap + 1), dtype=float)
        pw = _power_block(ns, design.cutoff, design.alpha, rate, mode)
        hit = np.flatnonzero(pw >= design.power)
        if hit.size:
            return int(ns[hit[0]])
        start += _BLOCK
    raise NoSolution(f"no sample size up to {design.cap} reaches power {design.power}")
