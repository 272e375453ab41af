"""Scenario simulation and Monte Carlo sweeps.

A scenario is a piecewise-constant true contamination rate over a number of
reporting periods.  Each period a sizing method picks ``n``, ``n`` Bernoulli
inspections are drawn, the belief is updated and classified, and the evidence
window rolls forward.

Randomness: every period of every replicate gets its own generator seeded
from ``(seed, period, replicate)``, so results do not depend on execution
order or on how many workers are used.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from typing import Any, Callable, Iterable, Literal, Sequence

import numpy as np

from .belief import BetaParams, EvidenceWindow, InspectionBatch, posterior_update
from .comparators import FixedDesign, PowerDesign, fixed_detection_size, power_analysis_size
from .errors import LowRiskError, NoSolution, NotLowRisk, ValidationError
from .sizing import min_sample_size
from .status import ColourStatus, Thresholds, assert_low_risk, classify, colour_of, tune_change_threshold

Method = Literal["adaptive", "power", "fixed"]
METHODS: tuple[str, ...] = ("adaptive", "power", "fixed")

TRACE_COLUMNS = ("period", "method", "n_sampled", "y_detected", "alpha", "beta", "t_change", "status")


def _canonical_hash(payload: Any) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _fmt(x: float | None) -> str:
    return "" if x is None else f"{x:.6g}"


# ---------------------------------------------------------------------------
# Inputs


@dataclass(frozen=True)
class ScenarioSchedule:
    segments: tuple[tuple[int, float], ...]
    n_periods: int
    name: str = "custom"

    def __post_init__(self) -> None:
        segs = tuple((int(s), float(r)) for s, r in self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs:
            raise ValidationError("schedule needs at least one segment")
        if segs[0][0] != 1:
            raise ValidationError(f"first segment must start at period 1, got {segs[0][0]}")
        starts = [s for s, _ in segs]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValidationError(f"segment starts must be strictly increasing, got {starts}")
        for s, r in segs:
            if not 0.0 <= r <= 1.0:
                raise ValidationError(f"segment starting at {s}: rate {r} outside [0, 1]")
        if self.n_periods < 1:
            raise ValidationError(f"n_periods must be positive, got {self.n_periods}")

    def rate_at(self, period: int) -> float:
        rate = self.segments[0][1]
        for start, r in self.segments:
            if start <= period:
                rate = r
        return rate

    @classmethod
    def constant(cls, rate: float, n_periods: int = 12, name: str = "constant") -> ScenarioSchedule:
        return cls(((1, rate),), n_periods, name)

    @classmethod
    def routine(cls, n_periods: int = 12) -> ScenarioSchedule:
        return cls(((1, 0.0012),), n_periods, "routine")

    @classmethod
    def risky(cls, n_periods: int = 12, onset: int = 5, elevated: float = 0.02) -> ScenarioSchedule:
        return cls(((1, 0.0012), (onset, elevated)), n_periods, "risky")

    @classmethod
    def very_low_risk(cls, n_periods: int = 12) -> ScenarioSchedule:
        return cls(((1, 0.0001),), n_periods, "very_low_risk")


@dataclass(frozen=True)
class SimConfig:
    """Method parameters shared by all three policies (defaults follow the routine set-up)."""

    t_risk: float = 0.005
    credible_level: float = 0.95
    window_len: int | None = 2
    prior_batches: tuple[tuple[int, int], ...] = ((5000, 3), (5000, 3))
    mode: str = "normal"
    target: float = 0.95
    cap: int = 1_000_000
    fixed: FixedDesign = FixedDesign(rounding="round_to_600")
    power: PowerDesign | None = None
    per_trial: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "prior_batches", tuple((int(n), int(y)) for n, y in self.prior_batches)
        )
        if self.power is None:
            object.__setattr__(self, "power", PowerDesign(cutoff=self.t_risk, cap=self.cap))

    def prior_window(self) -> EvidenceWindow:
        if not self.prior_batches:
            raise ValidationError("prior_batches is empty; supply elicited or proxy prior data")
        first = 1 - len(self.prior_batches)
        return EvidenceWindow.from_counts(self.prior_batches, self.window_len, first_period=first)

    def config_hash(self) -> str:
        return _canonical_hash(asdict(self))


# ---------------------------------------------------------------------------
# Outputs


@dataclass(frozen=True)
class PeriodRecord:
    period: int
    method: str
    true_rate: float
    n_sampled: int
    y_detected: int
    prior_alpha: float
    prior_beta: float
    alpha: float
    beta: float
    t_change: float | None
    status: ColourStatus

    def row(self) -> dict[str, Any]:
        return {
            "period": self.period,
            "method": self.method,
            "n_sampled": self.n_sampled,
            "y_detected": self.y_detected,
            "alpha": _fmt(self.alpha),
            "beta": _fmt(self.beta),
            "t_change": _fmt(self.t_change),
            "status": str(self.status),
        }


@dataclass
class SimulationTrace:
    method: str
    schedule: ScenarioSchedule
    seed: int
    replicate: int
    config_hash: str
    records: list[PeriodRecord] = field(default_factory=list)
    halted: bool = False
    halt_reason: str | None = None

    @property
    def statuses(self) -> list[ColourStatus]:
        return [r.status for r in self.records]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(
            f"# method={self.method} schedule={self.schedule.name} seed={self.seed} "
            f"replicate={self.replicate} config_hash={self.config_hash}\n"
        )
        writer = csv.DictWriter(buf, fieldnames=TRACE_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for rec in self.records:
            writer.writerow(rec.row())
        return buf.getvalue()

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "schedule": {
                "name": self.schedule.name,
                "segments": [list(s) for s in self.schedule.segments],
                "n_periods": self.schedule.n_periods,
            },
            "seed": self.seed,
            "replicate": self.replicate,
            "config_hash": self.config_hash,
            "halted": self.halted,
            "halt_reason": self.halt_reason,
            "periods": [
                {
                    **rec.row(),
                    "true_rate": _fmt(rec.true_rate),
                    "prior_alpha": _fmt(rec.prior_alpha),
                    "prior_beta": _fmt(rec.prior_beta),
                }
                for rec in self.records
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


@dataclass
class SweepResult:
    kind: str
    axis: str | None
    rows: list[dict[str, Any]]
    seed: int | None = None
    config_hash: str = ""

    def columns(self) -> list[str]:
        cols: list[str] = []
        for row in self.rows:
            for key in row:
                if key not in cols:
                    cols.append(key)
        return cols

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# kind={self.kind} axis={self.axis} seed={self.seed} config_hash={self.config_hash}\n")
        writer = csv.DictWriter(buf, fieldnames=self.columns(), lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow({k: _cell(v) for k, v in row.items()})
        return buf.getvalue()

    def to_json(self) -> str:
        payload = {
            "kind": self.kind,
            "axis": self.axis,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "rows": [{k: _json_cell(v) for k, v in row.items()} for row in self.rows],
        }
        return json.dumps(payload, indent=2, sort_keys=True)


def _cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, Fraction)):
        return _fmt(float(v))
    return str(v)


def _json_cell(v: Any) -> Any:
    if isinstance(v, Fraction):
        return float(v)
    if isinstance(v, float):
        return float(f"{v:.6g}")
    return v


# ---------------------------------------------------------------------------
# Simulation


def period_rng(seed: int, period: int, replicate: int = 0) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(period), int(replicate)])


def run_period(true_rate: float, n: int, rng: np.random.Generator, per_trial: bool = False) -> int:
    """Number of contaminated items among ``n`` independent inspections."""
    if n < 0:
        raise ValidationError(f"n must be non-negative, got {n}")
    if not 0.0 <= true_rate <= 1.0:
        raise ValidationError(f"rate must lie in [0, 1], got {true_rate}")
    if n == 0:
        return 0
    if per_trial:
        return int(np.count_nonzero(rng.random(n) < true_rate))
    return int(rng.binomial(n, true_rate))


def roll_window(window: EvidenceWindow, new_batch: InspectionBatch) -> EvidenceWindow:
    return window.roll(new_batch)


def _sample_size(method: str, window: EvidenceWindow, prior: BetaParams, config: SimConfig) -> tuple[int, float | None]:
    """Sample size and change threshold in force for one period."""
    if method == "adaptive":
        thresholds = Thresholds.tuned(prior, config.t_risk, config.credible_level)
        res = min_sample_size(prior, thresholds, config.target, config.mode, config.cap)  # type: ignore[arg-type]
        return res.n_min, thresholds.t_change
    t_change = tune_change_threshold(prior, config.credible_level)
    if method == "power":
        return power_analysis_size(window, config.power), t_change  # type: ignore[arg-type]
    if method == "fixed":
        return fixed_detection_size(config.fixed), t_change
    raise ValidationError(f"unknown method {method!r}; choose from {METHODS}")


def run_scenario(
    schedule: ScenarioSchedule,
    method: str,
    config: SimConfig = SimConfig(),
    seed: int = 0,
    replicate: int = 0,
) -> SimulationTrace:
    """Simulate ``schedule`` under one sizing method.

    The adaptive method stops with ``halted=True`` once a posterior turns Red
    (or a later prior window is no longer low risk): sizing is undefined from
    there on until the high-risk data are separated out.  Comparator methods
    stop only when their own sizing rule breaks down.
    """
    if method not in METHODS:
        raise ValidationError(f"unknown method {method!r}; choose from {METHODS}")
    window = config.prior_window()
    trace = SimulationTrace(method, schedule, seed, replicate, config.config_hash())
    if method == "adaptive" and not assert_low_risk(window.belief(), config.t_risk, config.credible_level):
        raise NotLowRisk("initial prior window is not low risk")

    for period in range(1, schedule.n_periods + 1):
        prior = window.belief()
        if method == "adaptive" and not assert_low_risk(prior, config.t_risk, config.credible_level):
            trace.halted, trace.halt_reason = True, f"prior window not low risk at period {period}"
            break
        try:
            n, t_change = _sample_size(method, window, prior, config)
        except (NotLowRisk, NoSolution, ValidationError) as exc:
            trace.halted, trace.halt_reason = True, f"sizing failed at period {period}: {exc}"
            break
        rate = schedule.rate_at(period)
        y = run_period(rate, n, period_rng(seed, period, replicate), config.per_trial)
        batch = InspectionBatch(period, n, y)
        posterior = posterior_update(prior, batch)
        status = (
            colour_of(posterior, t_change, config.t_risk, config.credible_level)
            if t_change is not None
            else ColourStatus.RED
        )
        trace.records.append(
            PeriodRecord(
                period, method, rate, n, y, prior.alpha, prior.beta,
                posterior.alpha, posterior.beta, t_change, status,
            )
        )
        if method == "adaptive" and status is ColourStatus.RED:
            trace.halted, trace.halt_reason = True, f"red status at period {period}"
            break
        window = window.roll(batch)
    return trace


def _map(fn: Callable[[Any], Any], items: Sequence[Any], workers: int) -> list[Any]:
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def run_replicates(
    schedule: ScenarioSchedule,
    method: str,
    config: SimConfig = SimConfig(),
    seed: int = 0,
    replicates: int = 100,
    workers: int = 1,
) -> list[SimulationTrace]:
    return _map(lambda i: run_scenario(schedule, method, config, seed, i), range(replicates), workers)


# ---------------------------------------------------------------------------
# Sweeps


def status_sweep(
    prior_window: EvidenceWindow | BetaParams,
    thresholds: Thresholds,
    n1: int,
    rate_grid: Iterable[float],
    iterations: int = 100,
    seed: int = 0,
    workers: int = 1,
) -> SweepResult:
    """Colour proportions after one period of ``n1`` samples at each true rate."""
    if n1 <= 0:
        raise ValidationError(f"n1 must be positive, got {n1}")
    if iterations <= 0:
        raise ValidationError(f"iterations must be positive, got {iterations}")
    prior = prior_window.belief() if isinstance(prior_window, EvidenceWindow) else prior_window
    rates = [float(r) for r in rate_grid]
    colour_cache: dict[int, ColourStatus] = {}

    def colour(y: int) -> ColourStatus:
        if y not in colour_cache:
            colour_cache[y] = classify(posterior_update(prior, (n1, y)), thresholds)
        return colour_cache[y]

    def cell(i: int) -> dict[str, Any]:
        ys = [run_period(rates[i], n1, period_rng(seed, i, j)) for j in range(iterations)]
        counts = {c: 0 for c in ColourStatus}
        for y in ys:
            counts[colour(y)] += 1
        return {
            "rate": rates[i],
            "n1": n1,
            "iterations": iterations,
            "green": counts[ColourStatus.GREEN],
            "orange": counts[ColourStatus.ORANGE],
            "red": counts[ColourStatus.RED],
            "p_green": Fraction(counts[ColourStatus.GREEN], iterations),
            "p_orange": Fraction(counts[ColourStatus.ORANGE], iterations),
            "p_red": Fraction(counts[ColourStatus.RED], iterations),
            "mean_detected": float(np.mean(ys)),
        }

    rows = _map(cell, list(range(len(rates))), workers)
    payload = {"prior": prior.as_tuple(), "thresholds": asdict(thresholds), "n1": n1,
               "rates": rates, "iterations": iterations}
    return SweepResult("status", "rate", rows, seed, _canonical_hash(payload))


@dataclass(frozen=True)
class SizingBase:
    """Base point for one-axis sizing sweeps.

    ``leak_rate`` (optional) ties the prior count to the prior size, ``y0 =
    round(leak_rate * n0)``, for sweeps at a fixed historical rate.
    """

    n0: int = 10000
    y0: int = 6
    t_risk: float = 0.005
    credible_level: float = 0.95
    mode: str = "normal"
    target: float = 0.95
    leak_rate: float | None = None


SIZING_AXES = ("t_risk", "y0", "n0", "credible_level")


def sizing_point(base: SizingBase) -> dict[str, Any]:
    y0 = base.y0 if base.leak_rate is None else int(round(base.leak_rate * base.n0))
    row: dict[str, Any] = {
        "n0": base.n0, "y0": y0, "t_risk": base.t_risk,
        "credible_level": base.credible_level, "mode": base.mode,
    }
    try:
        prior = BetaParams.from_counts(base.n0, y0)
        if not assert_low_risk(prior, base.t_risk, base.credible_level):
            raise NotLowRisk("prior not low risk")
        thresholds = Thresholds.tuned(prior, base.t_risk, base.credible_level)
        res = min_sample_size(prior, thresholds, base.target, base.mode)  # type: ignore[arg-type]
    except LowRiskError as exc:
        row.update(n_min=None, y_crit=None, t_change=None, achieved_success=None,
                   error=type(exc).__name__)
        return row
    row.update(n_min=res.n_min, y_crit=res.y_crit, t_change=res.t_change,
               achieved_success=res.achieved_success, error="")
    return row


def sizing_sweep(
    axis: str, grid: Iterable[Any], base: SizingBase = SizingBase(), workers: int = 1
) -> SweepResult:
    """Recommended minimum sample size along one axis; failing points are recorded, not raised."""
    if axis not in SIZING_AXES:
        raise ValidationError(f"axis must be one of {SIZING_AXES}, got {axis!r}")
    values = list(grid)
    cast = int if axis in ("y0", "n0") else float
    points = [replace(base, **{axis: cast(v)}) for v in values]
    rows = _map(sizing_point, points, workers)
    for row, v in zip(rows, values):
        row["axis_value"] = cast(v)
    return SweepResult("sizing", axis, rows, None, _canonical_hash({"axis": axis, "grid": values, "base": asdict(base)}))
