"""Minimum next-period sample size for a low-risk pathway.

For a candidate sample size ``n1`` the policy "succeeds" at a hypothetical
rate ``r' > t_risk`` when the updated belief leaves Green, i.e. when the
period's contaminated count reaches the change boundary.  Averaging that
success probability over the prior truncated to ``(t_risk, 1]`` gives the
weighted success; the recommendation is the smallest ``n1`` whose weighted
success reaches the target (0.95 by default).

Two evaluation modes are offered:

``normal``
    The count is treated as continuous: the change boundary is the real
    ``y*`` at which the updated belief sits exactly on the credible level,
    and the binomial is replaced by a Gaussian with mean ``n1*r'`` and sd
    ``sqrt(n1*r'*(1-r'))`` (no continuity correction).  Smooth in ``n1``.
``exact``
    Integer boundary ``y_crit = ceil(y*)`` and the exact binomial tail.  The
    weighted success is a sawtooth in ``n1``, which the search guards against
    with a downward scan.

The truncated prior is handled in ``t = -log r`` so that the integrand can be
kept in log space when the prior's second shape is of order 1e4.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.optimize import brentq
from scipy.special import xlog1py, xlogy

from .belief import (
    BetaParams,
    EvidenceWindow,
    beta_cdf,
    binomial_tail_upper,
    normal_upper_tail,
)
from .errors import NoSolution, NotLowRisk, ValidationError
from .quadrature import integrate
from .status import Thresholds, assert_low_risk

SizingMode = Literal["exact", "normal"]

DEFAULT_CAP = 1_000_000
DEFAULT_SCAN = 50
QUAD_ABSTOL = 1e-9


@dataclass(frozen=True)
class SizingResult:
    n_min: int
    y_crit: int
    achieved_success: float
    mode: str
    y_threshold: float
    t_change: float
    t_risk: float
    credible_level: float
    target: float
    prior: BetaParams
    # weighted success one sample below the recommendation (None when n_min == 1)
    previous_success: float | None = None
    evaluations: int = field(default=0, compare=False)

    def to_dict(self) -> dict:
        return {
            "n_min": self.n_min,
            "y_crit": self.y_crit,
            "y_threshold": self.y_threshold,
            "achieved_success": self.achieved_success,
            "previous_success": self.previous_success,
            "mode": self.mode,
            "t_change": self.t_change,
            "t_risk": self.t_risk,
            "credible_level": self.credible_level,
            "target": self.target,
            "prior_alpha": self.prior.alpha,
            "prior_beta": self.prior.beta,
        }


def _check_mode(mode: str) -> None:
    if mode not in ("exact", "normal"):
        raise ValidationError(f"mode must be 'exact' or 'normal', got {mode!r}")


def _as_belief(prior: EvidenceWindow | BetaParams) -> BetaParams:
    if isinstance(prior, EvidenceWindow):
        if not prior.batches:
            raise ValidationError("the prior evidence window is empty")
        return prior.belief()
    return prior


def _stays_green(n1: int, prior: BetaParams, t_change: float, level: float, y: float) -> float:
    """Margin of the updated belief over the credible level (>= 0 means still Green)."""
    return beta_cdf(t_change, BetaParams(prior.alpha + y, prior.beta + n1 - y)) - level


def critical_contamination_count(
    n1: int, prior: BetaParams, t_change: float, credible_level: float = 0.95
) -> int:
    """Smallest integer count in a period of ``n1`` samples that leaves Green.

    Returns ``n1 + 1`` when no count does.  Binary search; the flag is
    monotone in the count because the updated Beta is stochastically
    increasing in it.
    """
    if n1 < 0:
        raise ValidationError(f"n1 must be non-negative, got {n1}")
    if _stays_green(n1, prior, t_change, credible_level, 0) < 0:
        return 0
    if _stays_green(n1, prior, t_change, credible_level, n1) >= 0:
        return n1 + 1
    lo, hi = 0, n1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _stays_green(n1, prior, t_change, credible_level, mid) < 0:
            hi = mid
        else:
            lo = mid
    return hi


def critical_contamination_level(
    n1: int, prior: BetaParams, t_change: float, credible_level: float = 0.95
) -> float:
    """Real-valued change boundary ``y*`` in ``[0, n1]`` (``n1 + 1`` if none exists)."""
    if n1 < 0:
        raise ValidationError(f"n1 must be non-negative, got {n1}")
    if _stays_green(n1, prior, t_change, credible_level, 0.0) < 0:
        return 0.0
    if n1 == 0 or _stays_green(n1, prior, t_change, credible_level, float(n1)) >= 0:
        return float(n1 + 1)
    return float(
        brentq(
            lambda y: _stays_green(n1, prior, t_change, credible_level, y),
            0.0,
            float(n1),
            xtol=1e-10,
            rtol=1e-13,
        )
    )


def _boundary(n1: int, prior: BetaParams, thresholds: Thresholds, mode: str) -> float:
    if mode == "exact":
        return float(
            critical_contamination_count(n1, prior, thresholds.t_change, thresholds.credible_level)
        )
    return critical_contamination_level(n1, prior, thresholds.t_change, thresholds.credible_level)


def _success_curve(n1: int, r: np.ndarray, boundary: float, mode: str) -> np.ndarray:
    if boundary <= 0.0:
        return np.ones_like(r)
    if mode == "exact":
        if boundary > n1:
            return np.zeros_like(r)
        return np.asarray(binomial_tail_upper(n1, r, int(boundary), "exact"), dtype=float)
    return np.asarray(normal_upper_tail(n1, r, boundary), dtype=float)


def success_prob_at_rate(
    n1: int,
    r_prime: float | np.ndarray,
    prior: BetaParams,
    thresholds: Thresholds,
    mode: SizingMode = "normal",
) -> float | np.ndarray:
    """Probability that ``n1`` samples at true rate ``r_prime`` leave Green."""
    _check_mode(mode)
    rr = np.atleast_1d(np.asarray(r_prime, dtype=float))
    if np.any(rr <= thresholds.t_risk) or np.any(rr > 1.0):
        raise ValidationError("hypothetical rates must lie in (t_risk, 1]")
    out = _success_curve(n1, rr, _boundary(n1, prior, thresholds, mode), mode)
    return float(out[0]) if np.ndim(r_prime) == 0 else out


# ---------------------------------------------------------------------------
# Truncated prior in t = -log r


@dataclass(frozen=True)
class _TruncatedPrior:
    alpha: float
    beta: float
    t_max: float
    shift: float
    log_mass_scaled: float
    breakpoints: tuple[float, ...]

    @property
    def log_mass(self) -> float:
        return self.shift + self.log_mass_scaled

    def log_kernel(self, t: np.ndarray) -> np.ndarray:
        """log of e^{-alpha t} (1 - e^{-t})^{beta - 1}; the r-space density times dr/dt."""
        with np.errstate(divide="ignore"):
            return -self.alpha * t + (self.beta - 1.0) * np.log(-np.expm1(-t))

    def weight(self, t: np.ndarray) -> np.ndarray:
        """Normalised truncated-prior density in the t variable."""
        return np.exp(self.log_kernel(t) - self.shift - self.log_mass_scaled)


def _log_kernel_scalar(alpha: float, beta: float, t: float) -> float:
    if t <= 0.0:
        return math.inf if beta < 1.0 else (-math.inf if beta > 1.0 else 0.0)
    return -alpha * t + (beta - 1.0) * math.log(-math.expm1(-t))


@functools.lru_cache(maxsize=256)
def _truncated_prior(alpha: float, beta: float, t_risk: float) -> _TruncatedPrior:
    t_max = -math.log(t_risk)
    # stationary point of the log kernel: r* = alpha / (alpha + beta - 1)
    anchors = [t_max]
    t_peak = None
    if beta > 1.0:
        r_peak = alpha / (alpha + beta - 1.0)
        if r_peak > t_risk:
            t_peak = -math.log(r_peak)
            anchors.append(t_peak)
    shift = max(_log_kernel_scalar(alpha, beta, t) for t in anchors)

    bps: set[float] = set()
    for anchor in anchors:
        r = math.exp(-anchor)
        slope = abs((beta - 1.0) * r / (1.0 - r) - alpha) if r < 1.0 else 0.0
        curv = abs(beta - 1.0) * r / (1.0 - r) ** 2 if r < 1.0 else 0.0
        scales = [s for s in (slope, math.sqrt(curv)) if s > 0.0]
        width = 1.0 / max(scales) if scales else t_max
        for k in (0.25, 0.5, 1, 2, 4, 8, 16, 32, 64, 128):
            bps.add(anchor - k * width)
            bps.add(anchor + k * width)
        bps.add(anchor)
    if beta < 1.0:
        # integrable singularity at t = 0
        bps.update(10.0**-k for k in range(1, 16))
    bps_t = tuple(sorted(b for b in bps if 0.0 < b < t_max))

    def scaled(t: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore", over="ignore"):
            return np.exp(-alpha * t + (beta - 1.0) * np.log(-np.expm1(-t)) - shift)

    mass, _ = integrate(scaled, 0.0, t_max, bps_t, abstol=1e-14, reltol=1e-12)
    if not mass > 0.0:
        raise ArithmeticError(f"truncated prior mass underflowed (alpha={alpha}, beta={beta})")
    return _TruncatedPrior(alpha, beta, t_max, shift, math.log(mass), bps_t)


def log_truncation_mass(prior: BetaParams, t_risk: float) -> float:
    """log of the unnormalised Beta mass above ``t_risk``, via r = e^{-t}."""
    if not 0.0 < t_risk < 1.0:
        raise ValidationError(f"t_risk must lie in (0, 1), got {t_risk}")
    return _truncated_prior(prior.alpha, prior.beta, t_risk).log_mass


def truncated_prior_log_density(
    r: float | np.ndarray, prior: BetaParams, t_risk: float
) -> float | np.ndarray:
    """Log density of the prior conditioned on ``r > t_risk`` (density w.r.t. r)."""
    rr = np.asarray(r, dtype=float)
    if np.any(rr <= t_risk) or np.any(rr > 1.0):
        raise ValidationError("r must lie in (t_risk, 1]")
    log_m = log_truncation_mass(prior, t_risk)
    with np.errstate(divide="ignore"):
        out = xlogy(prior.alpha - 1.0, rr) + xlog1py(prior.beta - 1.0, -rr) - log_m
    return float(out) if np.ndim(r) == 0 else out


def weighted_success_prob(
    n1: int, prior: BetaParams, thresholds: Thresholds, mode: SizingMode = "normal"
) -> float:
    """Success probability averaged over rates above ``t_risk``, weighted by the truncated prior."""
    _check_mode(mode)
    if n1 < 0:
        raise ValidationError(f"n1 must be non-negative, got {n1}")
    if n1 == 0:
        # no new data: the updated belief is the prior itself
        green = _stays_green(0, prior, thresholds.t_change, thresholds.credible_level, 0) >= 0
        return 0.0 if green else 1.0
    boundary = _boundary(n1, prior, thresholds, mode)
    if boundary <= 0.0:
        return 1.0
    tp = _truncated_prior(prior.alpha, prior.beta, thresholds.t_risk)

    def integrand(t: np.ndarray) -> np.ndarray:
        return _success_curve(n1, np.exp(-t), boundary, mode) * tp.weight(t)

    value, _ = integrate(integrand, 0.0, tp.t_max, tp.breakpoints, abstol=QUAD_ABSTOL)
    return min(max(value, 0.0), 1.0)


def min_sample_size(
    prior_window: EvidenceWindow | BetaParams,
    thresholds: Thresholds,
    target: float = 0.95,
    mode: SizingMode = "normal",
    cap: int = DEFAULT_CAP,
    scan: int = DEFAULT_SCAN,
) -> SizingResult:
    """Smallest ``n1`` whose weighted success reaches ``target``.

    Doubling brackets the answer, bisection narrows it, and a downward scan
    of up to ``scan`` consecutive smaller sizes catches sawtooth minima that
    the bisection stepped over.
    """
    _check_mode(mode)
    if not 0.0 < target < 1.0:
        raise ValidationError(f"target must lie in (0, 1), got {target}")
    prior = _as_belief(prior_window)
    if not assert_low_risk(prior, thresholds.t_risk, thresholds.credible_level):
        raise NotLowRisk(
            f"prior Beta({prior.alpha:g}, {prior.beta:g}) places less than "
            f"{thresholds.credible_level:g} of its mass below t_risk={thresholds.t_risk:g}; "
            "remove the high-risk subpathway's data before sizing"
        )

    cache: dict[int, float] = {}

    def ws(n: int) -> float:
        if n not in cache:
            cache[n] = weighted_success_prob(n, prior, thresholds, mode)
        return cache[n]

    lo, hi = 0, 1
    while ws(hi) < target:
        lo = hi
        if hi >= cap:
            raise NoSolution(f"no sample size up to {cap} reaches weighted success {target}")
        hi = min(2 * hi, cap)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ws(mid) >= target:
            hi = mid
        else:
            lo = mid

    best = hi
    k = best - 1
    misses = 0
    while k >= 1 and misses < scan:
        if ws(k) >= target:
            best = k
            misses = 0
        else:
            misses += 1
        k -= 1

    return SizingResult(
        n_min=best,
        y_crit=critical_contamination_count(
            best, prior, thresholds.t_change, thresholds.credible_level
        ),
        achieved_success=ws(best),
        mode=mode,
        y_threshold=_boundary(best, prior, thresholds, "normal"),
        t_change=thresholds.t_change,
        t_risk=thresholds.t_risk,
        credible_level=thresholds.credible_level,
        target=target,
        prior=prior,
        previous_success=ws(best - 1) if best > 1 else None,
        evaluations=len(cache),
    )
