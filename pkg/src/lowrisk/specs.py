"""Loading, validating and running simulation / sweep spec files (TOML or JSON).

Bundled specs live in ``lowrisk/bundled`` and can be referred to by name
(``routine``, ``risky``, ``very_low_risk``, ``fig3``, ``fig6``, ``fig7``).
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

from .belief import BetaParams
from .comparators import FixedDesign, PowerDesign
from .errors import ValidationError
from .simulator import (
    METHODS,
    SIZING_AXES,
    ScenarioSchedule,
    SimConfig,
    TRACE_COLUMNS,
    SimulationTrace,
    SizingBase,
    SweepResult,
    _canonical_hash,
    run_replicates,
    sizing_sweep,
    status_sweep,
)
from .sizing import min_sample_size
from .status import Thresholds

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

KINDS = ("scenario", "status_sweep", "sizing_sweep")


def bundled_names() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files("lowrisk").joinpath("bundled").iterdir() if p.name.endswith(".toml"))


def load_spec(ref: str | Path) -> dict[str, Any]:
    """Parse a spec file, or a bundled spec by name."""
    path = Path(ref)
    if path.exists():
        text, origin = path.read_text(), str(path)
    elif str(ref) in bundled_names():
        text = resources.files("lowrisk").joinpath("bundled").joinpath(f"{ref}.toml").read_text()
        origin, path = f"<bundled:{ref}>", Path(f"{ref}.toml")
    else:
        raise ValidationError(f"{ref}: no such spec file or bundled spec (bundled: {', '.join(bundled_names())})")
    try:
        if path.suffix == ".json":
            spec = json.loads(text)
        else:
            spec = tomllib.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{origin}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"{origin}: {exc}") from exc
    spec.setdefault("name", path.stem)
    validate_spec(spec, origin)
    return spec


def _require(cond: bool, origin: str, where: str, msg: str) -> None:
    if not cond:
        raise ValidationError(f"{origin}: field '{where}': {msg}")


def _prob(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and 0.0 <= v <= 1.0


def validate_spec(spec: dict[str, Any], origin: str = "<spec>") -> None:
    kind = spec.get("kind")
    _require(kind in KINDS, origin, "kind", f"must be one of {KINDS}, got {kind!r}")
    if kind == "scenario":
        sched = spec.get("schedule")
        _require(isinstance(sched, dict), origin, "schedule", "missing table")
        segs = sched.get("segments")
        _require(isinstance(segs, list) and len(segs) > 0, origin, "schedule.segments", "need a non-empty list")
        for i, seg in enumerate(segs):
            _require(
                isinstance(seg, list) and len(seg) == 2 and isinstance(seg[0], int) and _prob(seg[1]),
                origin, f"schedule.segments[{i}]", "expected [start_period, rate] with rate in [0, 1]",
            )
        _require(isinstance(sched.get("n_periods"), int) and sched["n_periods"] > 0,
                 origin, "schedule.n_periods", "must be a positive integer")
        methods = spec.get("methods", list(METHODS))
        for i, m in enumerate(methods):
            _require(m in METHODS, origin, f"methods[{i}]", f"unknown method {m!r}")
        _require(isinstance(spec.get("replicates", 1), int) and spec.get("replicates", 1) > 0,
                 origin, "replicates", "must be a positive integer")
        _check_config(spec.get("config", {}), origin)
    elif kind == "status_sweep":
        rates = spec.get("rates")
        _require(isinstance(rates, list) and rates and all(_prob(r) for r in rates),
                 origin, "rates", "need a non-empty list of rates in [0, 1]")
        n1 = spec.get("n1", "auto")
        _require(n1 == "auto" or (isinstance(n1, int) and n1 > 0), origin, "n1", "positive integer or 'auto'")
        _require(isinstance(spec.get("iterations", 100), int) and spec.get("iterations", 100) > 0,
                 origin, "iterations", "must be a positive integer")
        prior = spec.get("prior", {})
        _require(isinstance(prior.get("n0"), int) and isinstance(prior.get("y0"), int),
                 origin, "prior", "needs integer n0 and y0")
        _require(0 <= prior["y0"] <= prior["n0"], origin, "prior.y0", "must lie in [0, n0]")
    else:
        sweeps = spec.get("sweeps")
        _require(isinstance(sweeps, list) and sweeps, origin, "sweeps", "need at least one [[sweeps]] table")
        base_fields = set(SizingBase.__dataclass_fields__)
        for k in spec.get("base", {}):
            _require(k in base_fields, origin, f"base.{k}", f"unknown field; expected one of {sorted(base_fields)}")
        for i, sw in enumerate(sweeps):
            _require(sw.get("axis") in SIZING_AXES, origin, f"sweeps[{i}].axis", f"must be one of {SIZING_AXES}")
            _require(isinstance(sw.get("grid"), list) and sw["grid"], origin, f"sweeps[{i}].grid", "need a non-empty list")
            for k, vals in sw.get("vary", {}).items():
                _require(k in base_fields, origin, f"sweeps[{i}].vary.{k}", "unknown field")
                _require(isinstance(vals, list) and vals, origin, f"sweeps[{i}].vary.{k}", "need a non-empty list")


_CONFIG_FIELDS = {"t_risk", "credible_level", "window_len", "prior_batches", "mode", "target", "cap",
                  "fixed_rounding", "power_alpha", "power", "per_trial"}


def _check_config(cfg: dict[str, Any], origin: str) -> None:
    for k in cfg:
        _require(k in _CONFIG_FIELDS, origin, f"config.{k}", f"unknown field; expected one of {sorted(_CONFIG_FIELDS)}")
    for i, b in enumerate(cfg.get("prior_batches", [])):
        _require(isinstance(b, list) and len(b) == 2 and all(isinstance(x, int) for x in b) and 0 <= b[1] <= b[0],
                 origin, f"config.prior_batches[{i}]", "expected [n_inspected, n_contaminated] with 0 <= y <= n")


def sim_config(cfg: dict[str, Any]) -> SimConfig:
    t_risk = cfg.get("t_risk", 0.005)
    cap = cfg.get("cap", 1_000_000)
    return SimConfig(
        t_risk=t_risk,
        credible_level=cfg.get("credible_level", 0.95),
        window_len=cfg.get("window_len", 2),
        prior_batches=tuple(tuple(b) for b in cfg.get("prior_batches", [[5000, 3], [5000, 3]])),
        mode=cfg.get("mode", "normal"),
        target=cfg.get("target", 0.95),
        cap=cap,
        fixed=FixedDesign(detection_level=t_risk, rounding=cfg.get("fixed_rounding", "round_to_600")),
        power=PowerDesign(cutoff=t_risk, alpha=cfg.get("power_alpha", 0.05), power=cfg.get("power", 0.95), cap=cap),
        per_trial=cfg.get("per_trial", False),
    )


@dataclass
class SpecOutput:
    name: str
    kind: str
    traces: list[SimulationTrace] | None = None
    sweep: SweepResult | None = None


def run_spec(spec: dict[str, Any], seed: int = 0, workers: int = 1) -> SpecOutput:
    kind = spec["kind"]
    if kind == "scenario":
        sched = spec["schedule"]
        schedule = ScenarioSchedule(tuple(tuple(s) for s in sched["segments"]), sched["n_periods"], spec["name"])
        config = sim_config(spec.get("config", {}))
        traces: list[SimulationTrace] = []
        for method in spec.get("methods", list(METHODS)):
            traces.extend(run_replicates(schedule, method, config, seed, spec.get("replicates", 1), workers))
        return SpecOutput(spec["name"], kind, traces=traces)
    if kind == "status_sweep":
        prior = BetaParams.from_counts(spec["prior"]["n0"], spec["prior"]["y0"])
        th = spec.get("thresholds", {})
        thresholds = Thresholds.tuned(prior, th.get("t_risk", 0.005), th.get("credible_level", 0.95))
        n1 = spec.get("n1", "auto")
        if n1 == "auto":
            n1 = min_sample_size(prior, thresholds, mode=th.get("mode", "normal")).n_min
        res = status_sweep(prior, thresholds, n1, spec["rates"], spec.get("iterations", 100), seed, workers)
        return SpecOutput(spec["name"], kind, sweep=res)
    base_kwargs = dict(spec.get("base", {}))
    rows: list[dict[str, Any]] = []
    for sw in spec["sweeps"]:
        vary = sw.get("vary", {})
        keys = list(vary)
        for combo in itertools.product(*(vary[k] for k in keys)) if keys else [()]:
            base = SizingBase(**{**base_kwargs, **dict(zip(keys, combo))})
            rows.extend({"axis": sw["axis"], **row} for row in sizing_sweep(sw["axis"], sw["grid"], base, workers).rows)
    return SpecOutput(spec["name"], kind, sweep=SweepResult("sizing", "mixed", rows, seed, _canonical_hash(spec)))


def render(output: SpecOutput, fmt: str) -> str:
    """Serialise a spec run as CSV or JSON text (both carry the seed and config hash)."""
    if output.sweep is not None:
        return output.sweep.to_csv() if fmt == "csv" else output.sweep.to_json() + "\n"
    traces = output.traces or []
    seed = traces[0].seed if traces else None
    chash = traces[0].config_hash if traces else ""
    if fmt == "json":
        payload = {"name": output.name, "seed": seed, "config_hash": chash,
                   "traces": [t.to_dict() for t in traces]}
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    buf.write(f"# scenario={output.name} seed={seed} config_hash={chash}\n")
    writer = csv.DictWriter(buf, fieldnames=("replicate", *TRACE_COLUMNS, "halted"), lineterminator="\n")
    writer.writeheader()
    for t in traces:
        for rec in t.records:
            writer.writerow({"replicate": t.replicate, **rec.row(), "halted": int(t.halted)})
    return buf.getvalue()
