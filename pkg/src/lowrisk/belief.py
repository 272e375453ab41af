"""Beta belief about the leakage rate and the binomial detection model.

The belief about a pathway's leakage rate ``r`` is a Beta distribution that
starts from the Jeffreys prior Beta(0.5, 0.5) and is updated conjugately with
inspection counts.  Everything here is a pure function of its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Literal, Mapping, Sequence

import numpy as np
from scipy.special import betaln, logsumexp, ndtr

from .errors import ValidationError

TailMode = Literal["exact", "normal"]

_CF_EPS = 1e-15
_CF_TINY = 1e-300
_CF_MAXITER = 100_000


@dataclass(frozen=True)
class BetaParams:
    """Shape pair of a Beta belief."""

    alpha: float
    beta: float

    def __post_init__(self) -> None:
        if not (self.alpha > 0 and self.beta > 0) or not (
            math.isfinite(self.alpha) and math.isfinite(self.beta)
        ):
            raise ValidationError(
                f"Beta shapes must be finite and positive, got ({self.alpha}, {self.beta})"
            )

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)

    @property
    def variance(self) -> float:
        s = self.alpha + self.beta
        return self.alpha * self.beta / (s * s * (s + 1.0))

    @classmethod
    def from_counts(cls, n_inspected: int, n_contaminated: int) -> BetaParams:
        """Jeffreys prior updated with ``n_contaminated`` hits among ``n_inspected``."""
        return update_counts(jeffreys_prior(), n_inspected, n_contaminated)

    def as_tuple(self) -> tuple[float, float]:
        return (self.alpha, self.beta)


@dataclass(frozen=True)
class InspectionBatch:
    """One reporting period's inspection outcome.

    ``meta`` carries operator-supplied fields (dates, consignment ids) through
    persistence untouched; it takes no part in equality.
    """

    period_id: int
    n_inspected: int
    n_contaminated: int
    meta: Mapping[str, Any] = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self) -> None:
        _check_counts(self.n_inspected, self.n_contaminated)

    @property
    def is_empty(self) -> bool:
        return self.n_inspected == 0


@dataclass(frozen=True)
class EvidenceWindow:
    """The most recent batches whose aggregate forms the prior for the next period.

    ``window_len=None`` keeps every batch.
    """

    batches: tuple[InspectionBatch, ...] = ()
    window_len: int | None = 2

    def __post_init__(self) -> None:
        if self.window_len is not None and self.window_len < 1:
            raise ValidationError(f"window_len must be positive, got {self.window_len}")
        object.__setattr__(self, "batches", tuple(self.batches))
        ids = [b.period_id for b in self.batches]
        if any(b <= a for a, b in zip(ids, ids[1:])):
            raise ValidationError(f"batches must be strictly ordered by period_id, got {ids}")
        if self.window_len is not None and len(self.batches) > self.window_len:
            object.__setattr__(self, "batches", self.batches[-self.window_len :])

    @classmethod
    def from_counts(
        cls, counts: Iterable[tuple[int, int]], window_len: int | None = 2, first_period: int = 1
    ) -> EvidenceWindow:
        batches = tuple(
            InspectionBatch(first_period + i, int(n), int(y)) for i, (n, y) in enumerate(counts)
        )
        return cls(batches, window_len)

    @property
    def n_inspected(self) -> int:
        return sum(b.n_inspected for b in self.batches)

    @property
    def n_contaminated(self) -> int:
        return sum(b.n_contaminated for b in self.batches)

    @property
    def last_period(self) -> int | None:
        return self.batches[-1].period_id if self.batches else None

    def belief(self) -> BetaParams:
        """Jeffreys prior updated with the aggregated window counts."""
        return update_counts(jeffreys_prior(), self.n_inspected, self.n_contaminated)

    def roll(self, batch: InspectionBatch) -> EvidenceWindow:
        """Append ``batch`` and drop anything older than ``window_len`` periods."""
        last = self.last_period
        if last is not None and batch.period_id <= last:
            raise ValidationError(
                f"period {batch.period_id} does not follow the latest retained period {last}"
            )
        return EvidenceWindow(self.batches + (batch,), self.window_len)


def _check_counts(n: int, y: int) -> None:
    if isinstance(n, bool) or isinstance(y, bool) or int(n) != n or int(y) != y:
        raise ValidationError(f"counts must be integers, got n={n!r}, y={y!r}")
    if n < 0 or y < 0:
        raise ValidationError(f"counts must be non-negative, got n={n}, y={y}")
    if y > n:
        raise ValidationError(f"contaminated count {y} exceeds inspected count {n}")


def jeffreys_prior() -> BetaParams:
    return BetaParams(0.5, 0.5)


def update_counts(prior: BetaParams, n_inspected: int, n_contaminated: int) -> BetaParams:
    _check_counts(n_inspected, n_contaminated)
    return BetaParams(prior.alpha + n_contaminated, prior.beta + n_inspected - n_contaminated)


def posterior_update(prior: BetaParams, batch: InspectionBatch | tuple[int, int]) -> BetaParams:
    """Conjugate update of ``prior`` with one batch (or an ``(n, y)`` pair)."""
    if isinstance(batch, InspectionBatch):
        return update_counts(prior, batch.n_inspected, batch.n_contaminated)
    n, y = batch
    return update_counts(prior, n, y)


# ---------------------------------------------------------------------------
# Regularized incomplete beta


def _log_beta_front(a: float, b: float, x: float) -> float:
    # betaln avoids the cancellation of lgamma(a+b) - lgamma(b) when b ~ 1e4
    return a * math.log(x) + b * math.log1p(-x) - float(betaln(a, b))


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for I_x(a, b), modified Lentz evaluation."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAXITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for scalar arguments."""
    if not 0.0 <= x <= 1.0 or math.isnan(x):
        raise ValidationError(f"x must lie in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(_log_beta_front(a, b, x)) * _betacf(a, b, x) / a
    return 1.0 - math.exp(_log_beta_front(a, b, x)) * _betacf(b, a, 1.0 - x) / b


def beta_cdf(x: float, params: BetaParams) -> float:
    """P(r <= x) under ``params``."""
    return regularized_incomplete_beta(params.alpha, params.beta, x)


def beta_quantile(q: float, params: BetaParams, tol: float = 1e-10) -> float:
    """Smallest x (to floating resolution) with ``beta_cdf(x) >= q``.

    Bisection on a bracket grown around a moment-matched Gaussian guess.  The
    loop runs until the bracket cannot be split any further, which is well
    inside ``tol`` (kept for interface compatibility); the returned upper end always satisfies cdf >= q, so a
    belief compared against its own quantile sits exactly on the boundary.
    """
    if not 0.0 < q < 1.0:
        raise ValidationError(f"q must lie in (0, 1), got {q}")
    guess = params.mean + float(_norm_ppf(q)) * math.sqrt(params.variance)
    guess = min(max(guess, 1e-300), 1.0 - 1e-16)
    lo, hi = 0.0, 1.0
    if beta_cdf(guess, params) >= q:
        hi = guess
        step = max(guess * 0.5, 1e-300)
        while True:
            cand = hi - step
            if cand <= 0.0:
                break
            if beta_cdf(cand, params) < q:
                lo = cand
                break
            hi = cand
            step *= 2.0
    else:
        lo = guess
        step = max((1.0 - guess) * 0.5, 1e-16)
        while True:
            cand = lo + step
            if cand >= 1.0:
                break
            if beta_cdf(cand, params) >= q:
                hi = cand
                break
            lo = cand
            step *= 2.0
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if beta_cdf(mid, params) >= q:
            hi = mid
        else:
            lo = mid
    return hi


def _norm_ppf(q: float) -> float:
    from scipy.special import ndtri

    return float(ndtri(q))


# ---------------------------------------------------------------------------
# Binomial tails


_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_STIRLERR_SMALL = np.array(
    [0.0] + [math.lgamma(k + 1.0) - (k + 0.5) * math.log(k) + k - _LOG_SQRT_2PI for k in range(1, 16)]
)


def _stirlerr(n: np.ndarray) -> np.ndarray:
    """log(n!) - log(sqrt(2 pi n) (n/e)^n) for non-negative integers ``n``."""
    n = np.asarray(n, dtype=float)
    small = n <= 15
    out = np.empty_like(n)
    out[small] = _STIRLERR_SMALL[n[small].astype(int)]
    m = n[~small]
    m2 = m * m
    out[~small] = (1.0 / 12 - (1.0 / 360 - (1.0 / 1260 - (1.0 / 1680 - 1.0 / (1188 * m2)) / m2) / m2) / m2) / m
    return out


def _bd0(x: np.ndarray, np_: np.ndarray) -> np.ndarray:
    """Deviance term x log(x / np) + np - x, accurate when x is close to np."""
    x, np_ = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(np_, dtype=float))
    out = np.empty(x.shape)
    near = np.abs(x - np_) < 0.1 * (x + np_)
    xf, mf = x[~near], np_[~near]
    with np.errstate(over="ignore"):
        ratio = xf / mf
    log_ratio = np.where(np.isfinite(ratio), np.log(np.where(np.isfinite(ratio), ratio, 1.0)), np.log(xf) - np.log(mf))
    out[~near] = xf * log_ratio + mf - xf
    xn, mn = x[near], np_[near]
    v = (xn - mn) / (xn + mn)
    s = (xn - mn) * v
    ej = 2.0 * xn * v
    for j in range(1, 20):
        ej = ej * v * v
        s = s + ej / (2 * j + 1)
    out[near] = s
    return out


def binomial_log_pmf(y: np.ndarray | int, n: int, r: np.ndarray | float) -> np.ndarray:
    """log P(Y = y) for Y ~ Binomial(n, r), with 0 < r < 1.

    Uses the saddle-point form (Stirling remainders plus deviance terms),
    which keeps near-full relative precision where differences of log-gamma
    values would cancel.
    """
    y, r = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(r, dtype=float))
    out = np.empty(y.shape)
    lo, hi = y == 0, y == n
    out[lo] = n * np.log1p(-r[lo])
    out[hi] = n * np.log(r[hi])
    mid = ~(lo | hi)
    ym, rm = y[mid], r[mid]
    lc = (
        _stirlerr(np.full(ym.shape, float(n)))
        - _stirlerr(ym)
        - _stirlerr(n - ym)
        - _bd0(ym, n * rm)
        - _bd0(n - ym, n * (1.0 - rm))
    )
    out[mid] = lc - _LOG_SQRT_2PI - 0.5 * (np.log(ym) + np.log1p(-ym / n))
    return out


def _exact_upper(n: int, r: np.ndarray, k: int) -> np.ndarray:
    out = np.empty_like(r)
    out[r <= 0.0] = 0.0
    out[r >= 1.0] = 1.0
    inner = (r > 0.0) & (r < 1.0)
    if not inner.any():
        return out
    ri = r[inner][:, None]
    res = np.empty(ri.shape[0])
    # Sum the side that does not contain the mode so the result keeps its relative accuracy.
    upper_side = k > n * ri[:, 0]
    if upper_side.any():
        ys = np.arange(k, n + 1, dtype=float)
        res[upper_side] = np.exp(logsumexp(binomial_log_pmf(ys, n, ri[upper_side]), axis=1))
    if (~upper_side).any():
        ys = np.arange(0, k, dtype=float)
        lower = np.exp(logsumexp(binomial_log_pmf(ys, n, ri[~upper_side]), axis=1))
        res[~upper_side] = 1.0 - lower
    out[inner] = np.clip(res, 0.0, 1.0)
    return out


def normal_upper_tail(n: int, r: np.ndarray | float, k: np.ndarray | float) -> np.ndarray:
    """Gaussian stand-in for P(Y >= k): mean n*r, sd sqrt(n*r*(1-r)), no continuity correction.

    ``k`` may be real-valued.  Rates of exactly 0 or 1 are point masses.
    """
    r = np.asarray(r, dtype=float)
    k = np.asarray(k, dtype=float)
    mean = n * r
    var = n * r * (1.0 - r)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (mean - k) / np.sqrt(var)
        tail = ndtr(z)
    point = np.where(mean >= k, 1.0, 0.0)
    return np.where(var > 0.0, tail, point)


def binomial_tail_upper(
    n: int, r: float | np.ndarray, k: int, mode: TailMode = "exact"
) -> float | np.ndarray:
    """P(Y >= k) for Y ~ Binomial(n, r).

    ``exact`` accumulates the pmf in log space; ``normal`` uses the plain
    Gaussian approximation.  ``r`` may be an array.
    """
    if n < 0 or int(n) != n:
        raise ValidationError(f"n must be a non-negative integer, got {n}")
    if k > n + 1:
        raise ValidationError(f"k={k} exceeds n+1={n + 1}")
    scalar = np.ndim(r) == 0
    rr = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any((rr < 0.0) | (rr > 1.0)):
        raise ValidationError("rates must lie in [0, 1]")
    if k <= 0:
        res = np.ones_like(rr)
    elif k > n:
        res = np.zeros_like(rr)
    elif mode == "exact":
        res = _exact_upper(int(n), rr, int(k))
    elif mode == "normal":
        res = np.asarray(normal_upper_tail(int(n), rr, float(k)), dtype=float)
    else:
        raise ValidationError(f"unknown mode {mode!r}")
    return float(res[0]) if scalar else res


def aggregate(batches: Sequence[InspectionBatch]) -> tuple[int, int]:
    return sum(b.n_inspected for b in batches), sum(b.n_contaminated for b in batches)
