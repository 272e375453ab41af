"""Command-line interface: ``lowrisk init | record | status | recommend | compare | simulate | sweep``."""

from __future__ import annotations

import functools
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable

import click

from .comparators import FixedDesign, PowerDesign, fixed_detection_size, power_analysis_size
from .errors import LowRiskError, ValidationError
from .simulator import _canonical_hash
from .specs import load_spec, render, run_spec
from .store import (
    PathwayConfig,
    PathwayState,
    init_state,
    load_state,
    locked,
    recommend,
    record,
    save_state,
    verify,
)

MODE = click.Choice(["exact", "normal"])
FORMAT = click.Choice(["csv", "json"])


def _p(x: float | None) -> str:
    return "-" if x is None else f"{x:.6g}"


def _handle_errors(fn: Callable[..., Any]) -> Callable[..., Any]:
    @functools.wraps(fn)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return fn(*args, **kwargs)
        except LowRiskError as exc:
            click.echo(f"error ({type(exc).__name__}): {exc}", err=True)
            sys.exit(exc.exit_code)

    return wrapper


def _parse_counts(values: tuple[str, ...]) -> list[tuple[int, int]]:
    out = []
    for v in values:
        try:
            n, y = (int(part) for part in v.replace(",", ":").split(":"))
        except ValueError:
            raise ValidationError(f"--prior expects N:Y (inspected:contaminated), got {v!r}") from None
        out.append((n, y))
    return out


def _config_hash(state: PathwayState) -> str:
    return _canonical_hash(state.to_dict()["config"])


def _header(state: PathwayState) -> None:
    click.echo(f"config_hash: {_config_hash(state)}")
    click.echo("seed: none (deterministic)")


def _show_state(state: PathwayState) -> None:
    c = state.cache
    _header(state)
    click.echo(f"periods recorded: {sum(1 for b in state.history if b.meta.get('source') == 'record')}")
    click.echo(f"window: n={c.window_n} y={c.window_y}")
    click.echo(f"belief: Beta({_p(c.alpha)}, {_p(c.beta)})")
    click.echo(f"t_change: {_p(c.t_change)}")
    click.echo(f"t_risk: {_p(state.config.t_risk)}")
    click.echo(f"low_risk: {'yes' if c.low_risk else 'no'}")
    click.echo(f"status: {c.status}")
    rec = c.recommendation
    if rec is None:
        click.echo("recommendation: none")
    else:
        click.echo(
            f"recommendation: n_min={rec['n_min']} y_crit={rec['y_crit']} "
            f"success={_p(rec['achieved_success'])} mode={rec['mode']}"
        )


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(package_name="lowrisk")
def main() -> None:
    """Adaptive inspection sample sizes for low-risk pathways."""


state_option = click.option(
    "--state", "state_path", type=click.Path(dir_okay=False), default="pathway.json",
    show_default=True, envvar="LOWRISK_STATE", help="Pathway state file.",
)


@main.command()
@state_option
@click.option("--prior", "priors", multiple=True, required=True, metavar="N:Y",
              help="Past period counts (inspected:contaminated); repeat per period, oldest first.")
@click.option("--t-risk", type=float, default=0.005, show_default=True)
@click.option("--level", "credible_level", type=float, default=0.95, show_default=True)
@click.option("--window", "window_len", type=int, default=2, show_default=True,
              help="Periods kept in the evidence window (0 keeps everything).")
@click.option("--mode", type=MODE, default="normal", show_default=True)
@click.option("--target", type=float, default=0.95, show_default=True)
@click.option("--force", is_flag=True, help="Overwrite an existing state file.")
@_handle_errors
def init(state_path: str, priors: tuple[str, ...], t_risk: float, credible_level: float,
         window_len: int, mode: str, target: float, force: bool) -> None:
    """Start a pathway from prior inspection counts."""
    config = PathwayConfig(t_risk, credible_level, window_len or None, mode, target)
    with locked(state_path):
        if Path(state_path).exists() and not force:
            raise ValidationError(f"{state_path} already exists; pass --force to overwrite")
        state = init_state(_parse_counts(priors), config)
        save_state(state, state_path)
    _show_state(state)


@main.command("record")
@state_option
@click.argument("n_inspected", type=int)
@click.argument("n_contaminated", type=int)
@click.option("--period", type=int, default=None, help="Period id (defaults to the next one).")
@click.option("--note", default=None, help="Free-text note stored with the batch.")
@_handle_errors
def record_cmd(state_path: str, n_inspected: int, n_contaminated: int, period: int | None,
               note: str | None) -> None:
    """Record one period's inspection results."""
    with locked(state_path):
        state = record(load_state(state_path), n_inspected, n_contaminated, period,
                       {"note": note} if note else None)
        save_state(state, state_path)
    _show_state(state)


@main.command()
@state_option
@click.option("--verify", "do_verify", is_flag=True, help="Replay the history and compare with the cache.")
@_handle_errors
def status(state_path: str, do_verify: bool) -> None:
    """Show the current belief, status and recommendation."""
    with locked(state_path, exclusive=False):
        state = load_state(state_path)
    _show_state(state)
    if do_verify:
        problems = verify(state)
        if problems:
            for p in problems:
                click.echo(f"verify: {p}")
            raise ValidationError("state cache does not match a replay of its history")
        click.echo("verify: ok")


@main.command("recommend")
@state_option
@click.option("--mode", type=MODE, default=None, help="Override the pathway's approximation mode.")
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text", show_default=True)
@_handle_errors
def recommend_cmd(state_path: str, mode: str | None, fmt: str) -> None:
    """Minimum sample size for the next period."""
    with locked(state_path, exclusive=False):
        state = load_state(state_path)
    if mode is not None:
        state = replace(state, config=replace(state.config, mode=mode))
    res = recommend(state)
    if fmt == "json":
        fields = {k: float(f"{v:.6g}") if isinstance(v, float) else v for k, v in res.to_dict().items()}
        payload = {"config_hash": _config_hash(state), "seed": None, **fields}
        click.echo(json.dumps(payload, indent=2, sort_keys=True))
        return
    _header(state)
    click.echo(f"n_min: {res.n_min}")
    click.echo(f"y_crit: {res.y_crit}")
    click.echo(f"success: {_p(res.achieved_success)} (at n_min - 1: {_p(res.previous_success)})")
    click.echo(f"t_change: {_p(res.t_change)}")
    click.echo(f"mode: {res.mode}")


@main.command()
@state_option
@click.option("--mode", type=MODE, default=None,
              help="Override the adaptive method's approximation mode (the power surrogate is always exact).")
@click.option("--fixed-rounding", type=click.Choice(["exact", "round_to_600"]), default="exact",
              show_default=True)
@_handle_errors
def compare(state_path: str, mode: str | None, fixed_rounding: str) -> None:
    """Adaptive, power-analysis and fixed-detection sample sizes side by side."""
    with locked(state_path, exclusive=False):
        state = load_state(state_path)
    cfg = state.config
    if mode is not None:
        state = replace(state, config=replace(cfg, mode=mode))
        cfg = state.config
    rows: list[tuple[str, str]] = []
    try:
        rows.append(("adaptive", str(recommend(state).n_min)))
    except LowRiskError as exc:
        rows.append(("adaptive", f"n/a ({type(exc).__name__})"))
    try:
        n_pow = power_analysis_size(state.window, PowerDesign(cutoff=cfg.t_risk, cap=cfg.cap))
        rows.append(("power", str(n_pow)))
    except LowRiskError as exc:
        rows.append(("power", f"n/a ({type(exc).__name__})"))
    rows.append(("fixed", str(fixed_detection_size(FixedDesign(cfg.t_risk, rounding=fixed_rounding)))))
    _header(state)
    click.echo(f"status: {state.status}")
    width = max(len(name) for name, _ in rows)
    for name, value in rows:
        click.echo(f"{name:<{width}}  {value}")


def _write_outputs(output: Any, out: str | None, fmt: str | None) -> None:
    if out is None:
        click.echo(render(output, fmt or "csv"), nl=False)
        return
    target = Path(out)
    formats = [fmt] if fmt else ["csv", "json"]
    for f in formats:
        path = target if (fmt and target.suffix) else target.with_suffix(f".{f}")
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(render(output, f))
        click.echo(f"wrote {path}", err=True)


def _apply_mode(spec: dict[str, Any], mode: str | None) -> None:
    if mode is None:
        return
    section = {"scenario": "config", "status_sweep": "thresholds", "sizing_sweep": "base"}[spec["kind"]]
    spec.setdefault(section, {})["mode"] = mode


def _spec_command(expected: tuple[str, ...]) -> Callable[..., Any]:
    def run(spec_ref: str, seed: int, out: str | None, fmt: str | None, mode: str | None, workers: int) -> None:
        spec = load_spec(spec_ref)
        if spec["kind"] not in expected:
            raise ValidationError(f"{spec_ref}: kind {spec['kind']!r} is not handled here (expected {expected})")
        _apply_mode(spec, mode)
        output = run_spec(spec, seed=seed, workers=workers)
        _write_outputs(output, out, fmt)

    return run


def _spec_options(fn: Callable[..., Any]) -> Callable[..., Any]:
    for deco in reversed([
        click.argument("spec_ref", metavar="SPEC"),
        click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=0, show_default=True),
        click.option("--out", type=click.Path(), default=None,
                     help="Output path; without --format both .csv and .json are written."),
        click.option("--format", "fmt", type=FORMAT, default=None),
        click.option("--mode", type=MODE, default=None, help="Override the approximation mode set in the spec file."),
        click.option("--workers", type=click.IntRange(1), default=1, show_default=True),
    ]):
        fn = deco(fn)
    return fn


@main.command()
@_spec_options
@_handle_errors
def simulate(**kwargs: Any) -> None:
    """Run a scenario spec (file path or bundled name: routine, risky, very_low_risk)."""
    _spec_command(("scenario",))(**kwargs)


@main.command()
@_spec_options
@_handle_errors
def sweep(**kwargs: Any) -> None:
    """Run a sweep spec (file path or bundled name: fig3, fig6, fig7)."""
    _spec_command(("status_sweep", "sizing_sweep"))(**kwargs)


if __name__ == "__main__":  # pragma: no cover
    main()
