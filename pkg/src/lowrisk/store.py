"""Pathway state file: configuration, inspection history and a derived cache.

The history is the source of truth.  Everything in the cache (current
belief, change threshold in force, last status, next recommendation) is a
fold over the history, so a state can always be rebuilt and audited by
replaying it.  The file is JSON with an explicit ``schema_version`` and is
replaced atomically on every write.
"""

from __future__ import annotations

import contextlib
import fcntl
import json
import os
import tempfile
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Iterator, Sequence

from .belief import BetaParams, EvidenceWindow, InspectionBatch, posterior_update
from .errors import NotLowRisk, RedStatus, ValidationError
from .sizing import SizingResult, min_sample_size
from .status import ColourStatus, Thresholds, assert_low_risk, colour_of, tune_change_threshold

SCHEMA_VERSION = 1

PRIOR = "prior"
RECORD = "record"


@dataclass(frozen=True)
class PathwayConfig:
    t_risk: float = 0.005
    credible_level: float = 0.95
    window_len: int | None = 2
    mode: str = "normal"
    target: float = 0.95
    cap: int = 1_000_000

    def __post_init__(self) -> None:
        if not 0.0 < self.t_risk < 1.0:
            raise ValidationError(f"t_risk must lie in (0, 1), got {self.t_risk}")
        if not 0.5 < self.credible_level < 1.0:
            raise ValidationError(f"credible_level must lie in (0.5, 1), got {self.credible_level}")
        if self.window_len is not None and self.window_len < 1:
            raise ValidationError(f"window_len must be positive, got {self.window_len}")
        if self.mode not in ("exact", "normal"):
            raise ValidationError(f"mode must be 'exact' or 'normal', got {self.mode!r}")


@dataclass(frozen=True)
class DerivedCache:
    alpha: float
    beta: float
    window_n: int
    window_y: int
    t_change: float
    low_risk: bool
    status: ColourStatus
    recommendation: dict[str, Any] | None

    @property
    def belief(self) -> BetaParams:
        return BetaParams(self.alpha, self.beta)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["status"] = str(self.status)
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> DerivedCache:
        return cls(**{**d, "status": ColourStatus.parse(d["status"])})


@dataclass(frozen=True)
class PathwayState:
    config: PathwayConfig
    history: tuple[InspectionBatch, ...]
    cache: DerivedCache
    schema_version: int = SCHEMA_VERSION

    @property
    def window(self) -> EvidenceWindow:
        return _window(self.config, self.history)

    @property
    def status(self) -> ColourStatus:
        return self.cache.status

    @property
    def next_period(self) -> int:
        return self.history[-1].period_id + 1 if self.history else 1

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": self.schema_version,
            "config": asdict(self.config),
            "history": [
                {
                    "period_id": b.period_id,
                    "n_inspected": b.n_inspected,
                    "n_contaminated": b.n_contaminated,
                    "meta": dict(b.meta),
                }
                for b in self.history
            ],
            "derived": self.cache.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> PathwayState:
        version = d.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ValidationError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
        try:
            config = PathwayConfig(**d["config"])
            history = tuple(
                InspectionBatch(int(h["period_id"]), int(h["n_inspected"]), int(h["n_contaminated"]),
                                dict(h.get("meta", {})))
                for h in d["history"]
            )
            cache = DerivedCache.from_dict(d["derived"])
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed state file: {exc}") from exc
        return cls(config, history, cache, version)


def _window(config: PathwayConfig, history: Sequence[InspectionBatch]) -> EvidenceWindow:
    return EvidenceWindow(tuple(b for b in history if not b.is_empty), config.window_len)


def _recommendation(config: PathwayConfig, window: EvidenceWindow, status: ColourStatus) -> dict[str, Any] | None:
    prior = window.belief()
    if status is ColourStatus.RED or not assert_low_risk(prior, config.t_risk, config.credible_level):
        return None
    thresholds = Thresholds.tuned(prior, config.t_risk, config.credible_level)
    return min_sample_size(prior, thresholds, config.target, config.mode, config.cap).to_dict()  # type: ignore[arg-type]


def _check_periods(history: Sequence[InspectionBatch]) -> None:
    ids = [b.period_id for b in history]
    if any(b <= a for a, b in zip(ids, ids[1:])):
        raise ValidationError(f"history periods must be strictly increasing, got {ids}")


def derive(config: PathwayConfig, history: Sequence[InspectionBatch]) -> DerivedCache:
    """Fold the history into the derived cache.

    Prior batches seed the window.  Each recorded batch is judged against
    the change threshold tuned on the window *before* it arrived, then the
    window rolls.  Empty batches are logged but change nothing.
    """
    _check_periods(history)
    priors = [b for b in history if b.meta.get("source") == PRIOR and not b.is_empty]
    if not priors:
        raise ValidationError(
            "no prior inspection data; supply elicited or proxy-pathway prior counts first"
        )
    window = EvidenceWindow(tuple(priors), config.window_len)
    belief = window.belief()
    t_change = tune_change_threshold(belief, config.credible_level)
    status = colour_of(belief, t_change, config.t_risk, config.credible_level)
    for batch in history:
        if batch.meta.get("source") == PRIOR or batch.is_empty:
            continue
        belief = posterior_update(window.belief(), batch)
        status = colour_of(belief, t_change, config.t_risk, config.credible_level)
        window = window.roll(batch)
        t_change = tune_change_threshold(window.belief(), config.credible_level)
    low_risk = assert_low_risk(window.belief(), config.t_risk, config.credible_level)
    return DerivedCache(
        alpha=belief.alpha,
        beta=belief.beta,
        window_n=window.n_inspected,
        window_y=window.n_contaminated,
        t_change=t_change,
        low_risk=low_risk,
        status=status,
        recommendation=_recommendation(config, window, status),
    )


def init_state(
    prior_counts: Sequence[tuple[int, int]],
    config: PathwayConfig = PathwayConfig(),
    meta: Sequence[dict[str, Any]] | None = None,
) -> PathwayState:
    """Start a pathway from past inspection data; refuses a prior that is not low risk."""
    if not prior_counts:
        raise ValidationError(
            "no prior inspection data; the method needs past counts (or elicited / proxy-pathway "
            "counts) that classify the pathway as low risk"
        )
    metas = list(meta) if meta is not None else [{} for _ in prior_counts]
    history = tuple(
        InspectionBatch(i + 1, int(n), int(y), {**m, "source": PRIOR})
        for i, ((n, y), m) in enumerate(zip(prior_counts, metas))
    )
    window = _window(config, history)
    if not window.batches:
        raise ValidationError("prior data contain no inspected items")
    prior = window.belief()
    if not assert_low_risk(prior, config.t_risk, config.credible_level):
        raise NotLowRisk(
            f"prior Beta({prior.alpha:g}, {prior.beta:g}) does not place {config.credible_level:g} "
            f"of its mass below t_risk={config.t_risk:g}. The pathway must begin in low-risk status: "
            "remove the high-risk subpathways' data before proceeding."
        )
    return PathwayState(config, history, derive(config, history))


def record(
    state: PathwayState,
    n_inspected: int,
    n_contaminated: int,
    period_id: int | None = None,
    meta: dict[str, Any] | None = None,
) -> PathwayState:
    """Append one period's counts and refresh the derived cache."""
    period = state.next_period if period_id is None else int(period_id)
    if state.history and period <= state.history[-1].period_id:
        raise ValidationError(
            f"period {period} does not follow the latest recorded period {state.history[-1].period_id}"
        )
    batch = InspectionBatch(period, n_inspected, n_contaminated, {**(meta or {}), "source": RECORD})
    history = state.history + (batch,)
    if batch.is_empty:
        return replace(state, history=history)
    return PathwayState(state.config, history, derive(state.config, history))


def recommend(state: PathwayState) -> SizingResult:
    """Recompute the next-period recommendation (raises RedStatus when not sizeable)."""
    if state.status is ColourStatus.RED:
        raise RedStatus(
            "status is red: the pathway is no longer confidently low risk, so no minimum sample "
            "size applies; separate the high-risk subpathway and re-initialise"
        )
    window = state.window
    prior = window.belief()
    if not assert_low_risk(prior, state.config.t_risk, state.config.credible_level):
        raise RedStatus("the retained evidence window is not low risk; sizing is undefined")
    thresholds = Thresholds.tuned(prior, state.config.t_risk, state.config.credible_level)
    c = state.config
    return min_sample_size(prior, thresholds, c.target, c.mode, c.cap)  # type: ignore[arg-type]


def rebuild(state: PathwayState) -> PathwayState:
    """Replay the history from scratch: init on the prior batches, then record each period."""
    priors = [b for b in state.history if b.meta.get("source") == PRIOR]
    fresh = init_state(
        [(b.n_inspected, b.n_contaminated) for b in priors],
        state.config,
        [{k: v for k, v in b.meta.items() if k != "source"} for b in priors],
    )
    for b in state.history:
        if b.meta.get("source") == PRIOR:
            continue
        fresh = record(
            fresh, b.n_inspected, b.n_contaminated, b.period_id,
            {k: v for k, v in b.meta.items() if k != "source"},
        )
    return fresh


def verify(state: PathwayState) -> list[str]:
    """Differences between the stored cache and a full replay (empty when consistent)."""
    replayed = rebuild(state)
    problems = []
    if replayed.history != state.history:
        problems.append("history differs after replay")
    mine, theirs = state.cache.to_dict(), replayed.cache.to_dict()
    for key in mine:
        if mine[key] != theirs[key]:
            problems.append(f"derived.{key}: stored {mine[key]!r}, replay {theirs[key]!r}")
    return problems


# ---------------------------------------------------------------------------
# Files


def dumps(state: PathwayState) -> str:
    return json.dumps(state.to_dict(), indent=2, sort_keys=True) + "\n"


def save_state(state: PathwayState, path: str | os.PathLike) -> None:
    """Write via a temporary file in the same directory, then rename over the target."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(dumps(state))
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def load_state(path: str | os.PathLike) -> PathwayState:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except FileNotFoundError:
        raise ValidationError(f"state file {path} does not exist; run `init` first") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") from exc
    return PathwayState.from_dict(payload)


@contextlib.contextmanager
def locked(path: str | os.PathLike, exclusive: bool = True) -> Iterator[None]:
    """Advisory lock on ``<path>.lock``; writers take it exclusively, readers shared."""
    lock_path = Path(f"{path}.lock")
    lock_path.parent.mkdir(parents=True, exist_ok=True)
    with open(lock_path, "a") as fh:
        fcntl.flock(fh.fileno(), fcntl.LOCK_EX if exclusive else fcntl.LOCK_SH)
        try:
            yield
        finally:
            fcntl.flock(fh.fileno(), fcntl.LOCK_UN)
