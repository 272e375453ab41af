"""Exit criteria, each checked at its stated tolerance.

Every test prints a single ``C<k>: PASS|FAIL`` line (collected again in the
terminal summary).  Run with ``pytest tests/test_acceptance.py -v``.
"""

import math
import time
from itertools import product

import mpmath
import numpy as np
import pytest
from scipy import stats

from lowrisk.belief import BetaParams, EvidenceWindow, beta_cdf, binomial_tail_upper, posterior_update
from lowrisk.comparators import FixedDesign, fixed_detection_size, power_analysis_size
from lowrisk.errors import NotLowRisk
from lowrisk.simulator import ScenarioSchedule, SimConfig, run_replicates, run_scenario
from lowrisk.sizing import _truncated_prior, min_sample_size, truncated_prior_log_density
from lowrisk.specs import load_spec, run_spec
from lowrisk.status import ColourStatus, Thresholds, assert_low_risk, classify
from lowrisk.store import init_state, load_state, rebuild, record, save_state, verify

pytestmark = pytest.mark.acceptance


def _n_min(n0, y0, t_risk, level=0.95, mode="normal"):
    prior = BetaParams.from_counts(n0, y0)
    return min_sample_size(prior, Thresholds.tuned(prior, t_risk, level), mode=mode).n_min


def test_c1_headline_sample_size(acceptance_report):
    _truncated_prior.cache_clear()
    prior = BetaParams.from_counts(10000, 6)
    start = time.perf_counter()
    res = min_sample_size(prior, Thresholds.tuned(prior, 0.005, 0.95))
    elapsed = time.perf_counter() - start
    lo, hi = math.ceil(756 * 0.97), math.floor(756 * 1.03)
    ok = lo <= res.n_min <= hi and elapsed < 5.0
    acceptance_report("C1 headline n_min", ok, f"n_min={res.n_min} (window [{lo}, {hi}]), {elapsed:.3f} s")
    assert ok


def test_c2_fixed_detection_identity(acceptance_report):
    n = fixed_detection_size(FixedDesign(0.005, 0.95))
    closed = 1 - 0.995**598 >= 0.95 > 1 - 0.995**597
    ok = n == 598 and closed
    acceptance_report("C2 fixed-method identity", ok, f"n={n}, 1-0.995^598={1 - 0.995**598:.6g}")
    assert ok


def test_c3_weighted_success_monte_carlo(acceptance_report):
    prior = BetaParams.from_counts(10000, 6)
    th = Thresholds.tuned(prior, 0.005)
    n1 = min_sample_size(prior, th).n_min
    rng = np.random.default_rng(20240)
    dist = stats.beta(prior.alpha, prior.beta)
    # inverse-cdf draws from the prior conditioned on r > t_risk
    r = dist.isf(rng.uniform(0.0, dist.sf(th.t_risk), size=20000))
    ys = rng.binomial(n1, r)
    colour = {}
    non_green = 0
    for y in ys.tolist():
        if y not in colour:
            colour[y] = classify(posterior_update(prior, (n1, y)), th)
        non_green += colour[y] is not ColourStatus.GREEN
    freq = non_green / len(ys)
    ok = freq >= 0.945 and bool(np.all(r > th.t_risk))
    acceptance_report("C3 weighted-success Monte Carlo", ok, f"non-Green frequency {freq:.6g} at n={n1}")
    assert ok


def test_c4_normal_mode_is_conservative(acceptance_report):
    rows, bad, skipped = [], [], []
    for n0, y0, t_risk in product((2000, 5000, 10000), (0, 1, 3, 6), (0.005, 0.01)):
        prior = BetaParams.from_counts(n0, y0)
        if not assert_low_risk(prior, t_risk):
            skipped.append((n0, y0, t_risk))
            continue
        normal = _n_min(n0, y0, t_risk, mode="normal")
        exact = _n_min(n0, y0, t_risk, mode="exact")
        rows.append((n0, y0, t_risk, normal, exact))
        if not exact <= normal <= 1.10 * exact:
            bad.append(f"({n0},{y0},{t_risk:g}): normal {normal} vs exact {exact}")
    ok = not bad
    detail = f"{len(rows) - len(bad)}/{len(rows)} priors within [exact, 1.1*exact]"
    if skipped:
        detail += f"; {len(skipped)} priors not low risk, skipped"
    if bad:
        detail += "; violations: " + ", ".join(bad[:6]) + (" ..." if len(bad) > 6 else "")
    acceptance_report("C4 conservativeness", ok, detail)
    assert ok, detail


def test_c5_method_ordering(acceptance_report):
    fixed = fixed_detection_size(FixedDesign(0.005, 0.95))
    routine = EvidenceWindow.from_counts([(5000, 3), (5000, 3)])
    adaptive = _n_min(10000, 6, 0.005)
    power = power_analysis_size(routine)
    very_low = power_analysis_size(EvidenceWindow.from_counts([(10000, 1)]))
    ratio = very_low / fixed
    ok = fixed <= adaptive <= power and 1.5 <= ratio <= 2.5
    acceptance_report(
        "C5 method ordering",
        ok,
        f"routine fixed={fixed} <= adaptive={adaptive} <= power={power}; "
        f"very low risk (10000, 1) power/fixed = {very_low}/{fixed} = {ratio:.6g}",
    )
    assert ok


def test_c6_colour_proportions(acceptance_report):
    spec = load_spec("fig6")
    start = time.perf_counter()
    rows = run_spec(spec, seed=0).sweep.rows
    elapsed = time.perf_counter() - start
    by_rate = {row["rate"]: row for row in rows}
    checks = {
        ">=90% Green at 0-0.05%": all(row["p_green"] >= 0.9 for r, row in by_rate.items() if r <= 0.0005),
        "majority non-Green at 0.5%": by_rate[0.005]["p_green"] < 0.5,
        "Red < 10% below 2%": all(row["p_red"] < 0.1 for r, row in by_rate.items() if r < 0.02),
        "Red > 50% at 5%": by_rate[0.05]["p_red"] > 0.5,
        "runtime < 60 s": elapsed < 60.0,
    }
    green_low = ", ".join(f"{r:g}:{float(by_rate[r]['p_green']):.2f}" for r in sorted(by_rate) if r <= 0.0005)
    detail = (
        "; ".join(f"{k} {'ok' if v else 'FAILED'}" for k, v in checks.items())
        + f" | Green share at low rates {green_low}; Red at 5% {float(by_rate[0.05]['p_red']):.2f};"
        + f" n1={rows[0]['n1']}, {elapsed:.2f} s"
    )
    ok = all(checks.values())
    acceptance_report("C6 colour proportions", ok, detail)
    assert ok, detail


def test_c7_monotonicity_and_u_shape(acceptance_report):
    t_grid = (0.003, 0.004, 0.005, 0.0075, 0.01, 0.015, 0.02)
    by_t = [_n_min(10000, 6, t) for t in t_grid]
    by_y0 = [_n_min(10000, y0, 0.005) for y0 in range(7)]
    by_level = [_n_min(10000, 6, 0.005, lvl) for lvl in (0.94, 0.95, 0.96)]
    n0_grid = (1000, 2000, 5000, 10000, 20000, 50000)
    by_n0 = [_n_min(n0, 0, 0.01) for n0 in n0_grid]
    by_n0_exact = [_n_min(n0, 0, 0.01, mode="exact") for n0 in n0_grid]

    def u_shaped(seq):
        i = int(np.argmin(seq))
        return 0 < i < len(seq) - 1 and seq[0] > seq[1] and seq[-1] > seq[-2]

    checks = {
        "non-increasing in T_risk": all(a >= b for a, b in zip(by_t, by_t[1:])),
        "non-decreasing in y0": all(a <= b for a, b in zip(by_y0, by_y0[1:])),
        "non-decreasing in level": all(a <= b for a, b in zip(by_level, by_level[1:])),
        "U-shape in N0": u_shaped(by_n0),
    }
    detail = (
        "; ".join(f"{k} {'ok' if v else 'FAILED'}" for k, v in checks.items())
        + f" | T_risk {by_t}; y0 {by_y0}; level {by_level}; N0 (normal) {by_n0}; N0 (exact) {by_n0_exact}"
    )
    ok = all(checks.values())
    acceptance_report("C7 monotonicity suite", ok, detail)
    assert ok, detail


def test_c8_numerics(acceptance_report):
    mpmath.mp.dps = 40
    xs = np.linspace(0.0, 1.0, 201)
    arcsine = max(abs(beta_cdf(x, BetaParams(0.5, 0.5)) - 2 / math.pi * math.asin(math.sqrt(x))) for x in xs)
    uniform = max(abs(beta_cdf(x, BetaParams(1.0, 1.0)) - x) for x in xs)

    rng = np.random.default_rng(8)
    worst_tail = 0.0
    for _ in range(60):
        n = int(rng.integers(1, 2001))
        r = float(10 ** rng.uniform(-4, -0.05))
        k = int(rng.integers(0, n + 1))
        rr = mpmath.mpf(r)
        oracle = mpmath.fsum(mpmath.binomial(n, j) * rr**j * (1 - rr) ** (n - j) for j in range(k, n + 1))
        if oracle < mpmath.mpf("1e-300"):
            continue
        worst_tail = max(worst_tail, float(abs(binomial_tail_upper(n, r, k, "exact") - oracle) / oracle))

    worst_norm = 0.0
    for a, b, t in ((6.5, 9994.5, 0.005), (0.5, 10000.5, 0.01), (3.5, 757.5, 0.005), (1.0, 1.0, 0.5)):
        prior = BetaParams(a, b)

        def dens(x, prior=prior, t=t):
            x = float(x)
            return mpmath.exp(truncated_prior_log_density(x, prior, t)) if x > t else 0.0

        pts = [t, t * 1.01, t * 1.1, t * 1.5, t * 2, t * 4, t * 10, 1.0]
        total = mpmath.quad(dens, sorted(set(min(p, 1.0) for p in pts)))
        worst_norm = max(worst_norm, abs(float(total) - 1.0))

    ok = arcsine <= 1e-9 and uniform <= 1e-9 and worst_tail <= 1e-12 and worst_norm <= 1e-6
    acceptance_report(
        "C8 numerics",
        ok,
        f"arcsine err {arcsine:.3g}, uniform err {uniform:.3g}, binomial tail rel err {worst_tail:.3g}, "
        f"truncated normalisation err {worst_norm:.3g}",
    )
    assert ok


def test_c9_determinism_and_persistence(acceptance_report, tmp_path):
    cfg = SimConfig()
    schedules = [ScenarioSchedule.routine(), ScenarioSchedule.risky(), ScenarioSchedule.very_low_risk()]
    identical = True
    for sched, method in product(schedules, ("adaptive", "power", "fixed")):
        a = [t.to_csv() + t.to_json() for t in run_replicates(sched, method, cfg, seed=42, replicates=4, workers=1)]
        b = [t.to_csv() + t.to_json() for t in run_replicates(sched, method, cfg, seed=42, replicates=4, workers=1)]
        c = [t.to_csv() + t.to_json() for t in run_replicates(sched, method, cfg, seed=42, replicates=4, workers=4)]
        identical &= a == b == c

    rng = np.random.default_rng(12)
    state = init_state([(5000, 3), (5000, 3)])
    path = tmp_path / "pathway.json"
    save_state(state, path)
    audit_ok = True
    for period in range(12):
        rate = 0.0012 if period < 8 else 0.004
        n = state.cache.recommendation["n_min"] if state.cache.recommendation else 600
        state = record(load_state(path), n, int(rng.binomial(n, rate)), meta={"quarter": period + 1})
        save_state(state, path)
        audit_ok &= verify(load_state(path)) == []
    final = load_state(path)
    audit_ok &= rebuild(final) == final and len(final.history) == 14
    ok = identical and audit_ok
    acceptance_report(
        "C9 determinism and persistence",
        ok,
        f"traces byte-identical across runs and 1/4 workers: {identical}; 12-period replay audit clean: {audit_ok}"
        f" (final status {final.status})",
    )
    assert ok


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(pytest.main([__file__, "-v", "-s"]))
