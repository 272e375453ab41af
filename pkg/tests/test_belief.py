"""Beta belief, incomplete beta numerics and binomial tails against independent oracles."""

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lowrisk.belief import (
    BetaParams,
    EvidenceWindow,
    InspectionBatch,
    aggregate,
    beta_cdf,
    beta_quantile,
    binomial_tail_upper,
    jeffreys_prior,
    normal_upper_tail,
    posterior_update,
    regularized_incomplete_beta,
)
from lowrisk.errors import ValidationError

mpmath.mp.dps = 40


def mp_beta_cdf(x, a, b):
    return float(mpmath.betainc(a, b, 0, x, regularized=True))


def mp_binom_upper(n, r, k):
    r = mpmath.mpf(r)
    return float(mpmath.fsum(mpmath.binomial(n, j) * r**j * (1 - r) ** (n - j) for j in range(k, n + 1)))


class TestBetaParams:
    def test_from_counts_adds_jeffreys(self):
        assert BetaParams.from_counts(10000, 6) == BetaParams(6.5, 9994.5)

    def test_moments(self):
        p = BetaParams(2.0, 6.0)
        assert p.mean == pytest.approx(0.25)
        assert p.variance == pytest.approx(2 * 6 / (8**2 * 9))

    @pytest.mark.parametrize("a,b", [(0.0, 1.0), (1.0, -2.0), (math.nan, 1.0), (1.0, math.inf)])
    def test_rejects_bad_parameters(self, a, b):
        with pytest.raises(ValidationError):
            BetaParams(a, b)

    def test_jeffreys(self):
        assert jeffreys_prior().as_tuple() == (0.5, 0.5)


class TestUpdate:
    def test_conjugate_counts(self):
        post = posterior_update(BetaParams(6.5, 9994.5), InspectionBatch(3, 756, 2))
        assert post == BetaParams(8.5, 10748.5)

    def test_tuple_batch(self):
        assert posterior_update(jeffreys_prior(), (10, 1)) == BetaParams(1.5, 9.5)

    @pytest.mark.parametrize("n,y", [(-1, 0), (5, 6), (5, -1)])
    def test_invalid_counts(self, n, y):
        with pytest.raises(ValidationError):
            posterior_update(jeffreys_prior(), (n, y))

    @given(
        st.lists(st.tuples(st.integers(0, 5000), st.integers(0, 5000)), min_size=1, max_size=6),
    )
    def test_sequential_equals_batch(self, pairs):
        """Updating period by period lands on the same Beta as pooling all counts."""
        batches = [(n, min(y, n)) for n, y in pairs]
        belief = jeffreys_prior()
        for b in batches:
            belief = posterior_update(belief, b)
        n_tot = sum(n for n, _ in batches)
        y_tot = sum(y for _, y in batches)
        assert belief == BetaParams.from_counts(n_tot, y_tot)


class TestEvidenceWindow:
    def test_roll_keeps_last_two(self):
        w = EvidenceWindow.from_counts([(5000, 3), (5000, 3)], window_len=2)
        w = w.roll(InspectionBatch(3, 757, 1))
        assert (w.n_inspected, w.n_contaminated) == (5757, 4)
        assert w.last_period == 3
        assert w.belief() == BetaParams(4.5, 5753.5)

    def test_unbounded_window(self):
        w = EvidenceWindow.from_counts([(100, 1)] * 5, window_len=None)
        assert aggregate(w.batches) == (500, 5)

    def test_out_of_order_rejected(self):
        w = EvidenceWindow.from_counts([(100, 1), (100, 0)], window_len=2)
        with pytest.raises(ValidationError):
            w.roll(InspectionBatch(1, 10, 0))


class TestIncompleteBeta:
    @pytest.mark.parametrize("x", np.linspace(0.0, 1.0, 41))
    def test_arcsine_closed_form(self, x):
        expected = 2.0 / math.pi * math.asin(math.sqrt(x))
        assert beta_cdf(x, BetaParams(0.5, 0.5)) == pytest.approx(expected, abs=1e-9)

    @pytest.mark.parametrize("x", np.linspace(0.0, 1.0, 41))
    def test_uniform_closed_form(self, x):
        assert beta_cdf(x, BetaParams(1.0, 1.0)) == pytest.approx(x, abs=1e-9)

    @pytest.mark.parametrize("b", [1.0, 2.0, 7.5, 300.0])
    def test_power_closed_form(self, b):
        # Beta(1, b) has cdf 1 - (1 - x)^b
        for x in (1e-4, 0.01, 0.3, 0.9):
            assert beta_cdf(x, BetaParams(1.0, b)) == pytest.approx(-math.expm1(b * math.log1p(-x)), abs=1e-12)

    @pytest.mark.parametrize(
        "a,b,x",
        [
            (6.5, 9994.5, 0.005),
            (6.5, 9994.5, 0.0011),
            (7.5, 10749.5, 0.0008),
            (0.5, 10000.5, 1e-5),
            (40.5, 2000.5, 0.02),
            (2.5, 3.5, 0.4),
            (300.0, 200.0, 0.6),
            (1000.5, 1000.5, 0.5),
        ],
    )
    def test_against_mpmath(self, a, b, x):
        assert regularized_incomplete_beta(a, b, x) == pytest.approx(mp_beta_cdf(x, a, b), rel=1e-10, abs=1e-13)

    def test_symmetry(self):
        for a, b, x in [(3.0, 8.0, 0.2), (0.5, 40.0, 0.01), (12.5, 2.0, 0.7)]:
            lhs = regularized_incomplete_beta(a, b, x)
            rhs = 1.0 - regularized_incomplete_beta(b, a, 1.0 - x)
            assert lhs == pytest.approx(rhs, abs=1e-13)

    def test_bounds(self):
        p = BetaParams(3.0, 4.0)
        assert beta_cdf(0.0, p) == 0.0
        assert beta_cdf(1.0, p) == 1.0
        with pytest.raises(ValidationError):
            beta_cdf(-0.1, p)


class TestQuantile:
    @pytest.mark.parametrize("a,b", [(0.5, 0.5), (1.0, 1.0), (6.5, 9994.5), (0.5, 10000.5), (25.0, 4.0), (3.5, 757.5)])
    @pytest.mark.parametrize("q", [0.01, 0.05, 0.5, 0.9, 0.95, 0.99])
    def test_round_trip(self, a, b, q):
        p = BetaParams(a, b)
        x = beta_quantile(q, p)
        assert abs(beta_cdf(x, p) - q) < 1e-9

    def test_matches_mpmath_root(self):
        p = BetaParams(6.5, 9994.5)
        x = beta_quantile(0.95, p)
        root = mpmath.findroot(
            lambda t: mpmath.betainc(6.5, 9994.5, 0, t, regularized=True) - 0.95, (0.0005, 0.003), solver="illinois"
        )
        assert x == pytest.approx(float(root), rel=1e-9)

    @given(st.floats(0.3, 50.0), st.floats(0.3, 5e4), st.floats(0.001, 0.999))
    @settings(max_examples=60, deadline=None)
    def test_round_trip_property(self, a, b, q):
        p = BetaParams(a, b)
        assert abs(beta_cdf(beta_quantile(q, p), p) - q) < 1e-9

    @pytest.mark.parametrize("q", [0.0, 1.0, -0.2, 1.5])
    def test_rejects_degenerate_levels(self, q):
        with pytest.raises(ValidationError):
            beta_quantile(q, BetaParams(2.0, 3.0))


class TestBinomialTail:
    @pytest.mark.parametrize(
        "n,r,k",
        [
            (757, 0.005, 1),
            (757, 0.02, 15),
            (2000, 0.001, 3),
            (2000, 0.3, 650),
            (2000, 0.5, 1000),
            (1500, 0.9, 1400),
            (50, 0.2, 45),
            (1, 0.5, 1),
            (598, 0.005, 1),
        ],
    )
    def test_exact_against_mpmath_sum(self, n, r, k):
        expected = mp_binom_upper(n, r, k)
        got = binomial_tail_upper(n, r, k, "exact")
        assert got == pytest.approx(expected, rel=1e-12, abs=1e-300)

    @pytest.mark.parametrize("seed", range(3))
    def test_random_cases_against_incomplete_beta_oracle(self, seed):
        """P(Y >= k) = I_r(k, n - k + 1); checked at random (n, r, k) with n <= 2000."""
        rng = np.random.default_rng(seed)
        for _ in range(25):
            n = int(rng.integers(1, 2001))
            r = float(10 ** rng.uniform(-4, -0.05))
            k = int(rng.integers(1, n + 1))
            expected = mpmath.betainc(k, n - k + 1, 0, mpmath.mpf(r), regularized=True)
            if expected < mpmath.mpf("1e-300"):
                continue
            got = binomial_tail_upper(n, r, k)
            assert abs(got - expected) / expected < 1e-12

    def test_vectorised_matches_scalar(self):
        rs = np.array([0.006, 0.01, 0.05, 0.2])
        vec = binomial_tail_upper(757, rs, 3)
        assert np.allclose(vec, [binomial_tail_upper(757, float(r), 3) for r in rs], rtol=0, atol=0)

    def test_edges(self):
        assert binomial_tail_upper(10, 0.3, 0) == 1.0
        assert binomial_tail_upper(10, 0.3, 11) == 0.0
        assert binomial_tail_upper(10, 0.0, 1) == 0.0
        assert binomial_tail_upper(10, 1.0, 10) == 1.0
        with pytest.raises(ValidationError):
            binomial_tail_upper(10, 0.3, 12)

    def test_normal_is_plain_gaussian(self):
        n, r, k = 757, 0.01, 6.3
        mu, sd = n * r, math.sqrt(n * r * (1 - r))
        expected = 0.5 * math.erfc((k - mu) / sd / math.sqrt(2))
        assert normal_upper_tail(n, r, k) == pytest.approx(expected, rel=1e-13)

    @given(st.integers(1, 400), st.floats(0.0, 1.0), st.integers(0, 401))
    @settings(max_examples=80, deadline=None)
    def test_tail_monotone_in_k(self, n, r, k):
        k = min(k, n)
        assert binomial_tail_upper(n, r, k) >= binomial_tail_upper(n, r, k + 1) - 1e-15
