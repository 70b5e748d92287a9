import math

import mpmath
import numpy as np
import pytest

from cvarlab.distributions import (
    BoundedMoment,
    Exponential,
    Gaussian,
    LightTailed,
    Lognormal,
    Pareto,
    StudentT,
    abs_moment,
    check_alpha,
    from_dict,
    numeric_cvar,
    numeric_var,
    sample,
    tail_class,
    to_dict,
    true_cvar,
    true_var,
)
from cvarlab.errors import InfiniteCVaR, NoFiniteMoment

ALPHAS = [0.5, 0.9, 0.95, 0.99]
FAMILIES = [
    Gaussian(0.0, 1.0),
    Gaussian(-2.0, 3.0),
    Exponential(1.0),
    Exponential(2.5),
    Pareto(1.0, 3.0),
    Pareto(2.0, 1.5),
    Lognormal(0.0, 1.0),
    Lognormal(0.5, 0.5),
    StudentT(3.0, 1.0),
    StudentT(2.5, 2.0),
]

mpmath.mp.dps = 30


def mp_normal_quantile(alpha):
    return float(mpmath.sqrt(2) * mpmath.erfinv(2 * mpmath.mpf(alpha) - 1))


def mp_tail_mean(pdf, lower, alpha):
    """E[X | X >= lower] = int_lower^inf x f(x) dx / (1 - alpha) in 30-digit arithmetic."""
    return float(mpmath.quad(lambda x: x * pdf(x), [lower, mpmath.inf]) / (1 - mpmath.mpf(alpha)))


def bisect(f, lo, hi, tol=1e-13):
    while hi - lo > tol * max(1.0, abs(hi)):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestSample:
    def test_same_seed_same_draw(self):
        a = sample(Gaussian(), 1, np.random.default_rng(7))
        b = sample(Gaussian(), 1, np.random.default_rng(7))
        assert a.shape == (1,)
        assert a[0] == b[0]

    def test_exponential_law_of_large_numbers(self):
        x = sample(Exponential(1.0), 10**6, np.random.default_rng(1))
        # 5 standard errors of the mean: 5 * 1 / sqrt(1e6) = 0.005.
        assert abs(x.mean() - 1.0) < 0.01

    def test_pareto_support(self):
        x = sample(Pareto(1.0, 3.0), 10**6, np.random.default_rng(2))
        assert x.min() >= 1.0

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            sample(Gaussian(), 0, np.random.default_rng(0))

    @pytest.mark.parametrize("dist", FAMILIES, ids=repr)
    def test_split_draws_match_single_draw(self, dist):
        # Bandit arms top up their samples in phases; this must not change the stream.
        one = dist.draw(np.random.default_rng(3), 37)
        rng = np.random.default_rng(3)
        two = np.concatenate([dist.draw(rng, 25), dist.draw(rng, 12)])
        np.testing.assert_array_equal(one, two)

    @pytest.mark.parametrize("dist", FAMILIES, ids=repr)
    def test_empirical_quantiles_match_true_var(self, dist):
        x = sample(dist, 200_000, np.random.default_rng(11))
        for alpha in (0.5, 0.9):
            assert np.mean(x <= true_var(dist, alpha)) == pytest.approx(alpha, abs=0.005)


class TestTrueVar:
    def test_gaussian_median(self):
        assert true_var(Gaussian(0, 1), 0.5) == 0.0

    def test_gaussian_95(self):
        assert true_var(Gaussian(0, 1), 0.95) == pytest.approx(mp_normal_quantile(0.95), abs=1e-12)
        assert true_var(Gaussian(0, 1), 0.95) == pytest.approx(1.6449, abs=1e-4)

    def test_pareto_closed_form_and_bisection(self):
        v = true_var(Pareto(1, 3), 0.9)
        assert v == pytest.approx(10 ** (1 / 3), rel=1e-14)
        assert v == pytest.approx(2.1544, abs=1e-4)
        oracle = bisect(lambda x: (1 - x**-3) - 0.9, 1.0, 100.0)
        assert v == pytest.approx(oracle, rel=1e-12)

    @pytest.mark.parametrize("dist", FAMILIES, ids=repr)
    @pytest.mark.parametrize("alpha", ALPHAS)
    def test_inversion_consistency(self, dist, alpha):
        assert float(dist.cdf(true_var(dist, alpha))) == pytest.approx(alpha, abs=1e-8)

    @pytest.mark.parametrize("dist", [Gaussian(1, 2), Exponential(3), Pareto(1, 3)], ids=repr)
    @pytest.mark.parametrize("alpha", ALPHAS)
    def test_closed_form_matches_root_finding(self, dist, alpha):
        assert true_var(dist, alpha) == pytest.approx(numeric_var(dist, alpha), rel=1e-10)

    @pytest.mark.parametrize("alpha", [0.0, 1.0, -0.1, 1.5, float("nan")])
    def test_invalid_alpha(self, alpha):
        with pytest.raises(ValueError):
            check_alpha(alpha)


class TestTrueCVaR:
    def test_exponential_memoryless(self):
        c = true_cvar(Exponential(1.0), 0.95)
        assert c == pytest.approx(math.log(20) + 1, rel=1e-14)
        assert c == pytest.approx(mp_tail_mean(lambda x: mpmath.exp(-x), math.log(20), 0.95), rel=1e-12)

    def test_gaussian_95(self):
        oracle = mp_tail_mean(
            lambda x: mpmath.npdf(x), mp_normal_quantile(0.95), 0.95
        )
        assert true_cvar(Gaussian(0, 1), 0.95) == pytest.approx(oracle, rel=1e-10)
        assert true_cvar(Gaussian(0, 1), 0.95) == pytest.approx(2.0627, abs=1e-3)

    def test_pareto(self):
        c = true_cvar(Pareto(1, 3), 0.9)
        assert c == pytest.approx(1.5 * 10 ** (1 / 3), rel=1e-14)
        assert c == pytest.approx(3.2316, abs=1e-4)
        oracle = mp_tail_mean(lambda x: 3 * x**-4, 10 ** (1 / 3), 0.9)
        assert c == pytest.approx(oracle, rel=1e-10)

    def test_gaussian_is_translation_invariant(self):
        base = true_cvar(Gaussian(0, 2), 0.9)
        assert true_cvar(Gaussian(5, 2), 0.9) == pytest.approx(base + 5, rel=1e-14)

    @pytest.mark.parametrize("alpha", ALPHAS)
    def test_lognormal_quadrature_against_closed_form(self, alpha):
        mu, s = 0.5, 0.5
        z = mp_normal_quantile(alpha)
        closed = math.exp(mu + s * s / 2) * float(mpmath.ncdf(s - z)) / (1 - alpha)
        assert true_cvar(Lognormal(mu, s), alpha) == pytest.approx(closed, rel=1e-8)

    @pytest.mark.parametrize("alpha", ALPHAS)
    def test_student_t_quadrature_against_closed_form(self, alpha):
        nu, scale = 3.0, 2.0
        dist = StudentT(nu, scale)
        t = true_var(dist, alpha) / scale
        dens = float(dist.pdf(t * scale)) * scale
        closed = scale * (nu + t * t) / (nu - 1) * dens / (1 - alpha)
        assert true_cvar(dist, alpha) == pytest.approx(closed, rel=1e-8)

    @pytest.mark.parametrize("dist", FAMILIES, ids=repr)
    @pytest.mark.parametrize("alpha", ALPHAS)
    def test_cvar_dominates_var(self, dist, alpha):
        assert true_cvar(dist, alpha) >= true_var(dist, alpha)

    @pytest.mark.parametrize("dist", [Gaussian(0, 1), Gaussian(3, 0.5), Exponential(1), Pareto(1, 3), Pareto(1, 1.5)], ids=repr)
    @pytest.mark.parametrize("alpha", ALPHAS)
    def test_closed_form_matches_quadrature(self, dist, alpha):
        assert true_cvar(dist, alpha) == pytest.approx(numeric_cvar(dist, alpha), rel=1e-6)

    @pytest.mark.parametrize("dist", [Pareto(1, 1.0), Pareto(1, 0.7), StudentT(1.0)], ids=repr)
    def test_infinite_cvar(self, dist):
        with pytest.raises(InfiniteCVaR):
            true_cvar(dist, 0.9)


class TestTailClass:
    def test_gaussian_is_light(self):
        assert isinstance(tail_class(Gaussian(0, 1)), LightTailed)

    def test_pareto_low_shape_moment_order(self):
        tc = tail_class(Pareto(1, 1.5))
        assert isinstance(tc, BoundedMoment)
        assert 1.0 < tc.p < 1.5

    def test_pareto_second_moment(self):
        tc = tail_class(Pareto(1, 3), p=2.0)
        second = float(mpmath.quad(lambda x: x**2 * 3 * x**-4, [1, mpmath.inf]))
        assert second == pytest.approx(3.0, rel=1e-12)
        assert tc.u >= 3.0
        assert tc.u == pytest.approx(3.15, rel=1e-9)

    def test_no_finite_moment(self):
        with pytest.raises(NoFiniteMoment):
            tail_class(Pareto(1, 0.9))

    @pytest.mark.parametrize(
        "dist,p,closed",
        [
            (Pareto(2.0, 3.0), 1.5, 3.0 * 2.0**1.5 / (3.0 - 1.5)),
            (Lognormal(0.3, 0.7), 2.0, math.exp(2 * 0.3 + 2 * 0.49)),
            (
                StudentT(4.0, 1.5),
                1.5,
                1.5**1.5
                * 4.0**0.75
                * math.gamma(1.25)
                * math.gamma(1.25)
                / (math.sqrt(math.pi) * math.gamma(2.0)),
            ),
        ],
        ids=["pareto", "lognormal", "student_t"],
    )
    def test_moment_quadrature(self, dist, p, closed):
        assert abs_moment(dist, p) == pytest.approx(closed, rel=1e-8)

    @pytest.mark.parametrize("dist", [Pareto(1, 3), Pareto(1, 1.5), Lognormal(0, 1), StudentT(3, 1), StudentT(1.8, 1)], ids=repr)
    def test_bounded_moment_holds(self, dist):
        tc = tail_class(dist)
        assert 1.0 < tc.p <= 2.0
        assert abs_moment(dist, tc.p) < tc.u

    @pytest.mark.parametrize("dist", [Gaussian(0, 1), Gaussian(0, 2.5), Exponential(1), Exponential(0.3)], ids=repr)
    def test_light_tail_mgf_bound(self, dist):
        """Centered MGF stays below exp(lambda^2 sigma^2 / 2) for |lambda| < 1/b."""
        tc = tail_class(dist)
        lams = np.linspace(-1, 1, 401)[1:-1] / tc.b
        if isinstance(dist, Gaussian):
            mgf = np.exp(0.5 * lams**2 * dist.stddev**2)
        else:
            m = dist.mean
            mgf = np.exp(-lams * m) / (1 - lams * m)
        assert np.all(mgf <= np.exp(0.5 * lams**2 * tc.sigma**2) * (1 + 1e-12))

    @pytest.mark.parametrize("dist", [Gaussian(0, 1), Exponential(1)], ids=repr)
    def test_empirical_tail_decays_exponentially(self, dist):
        x = sample(dist, 10**6, np.random.default_rng(5))
        freqs = np.array([np.mean(x > t) for t in (0.0, 1.0, 2.0, 3.0)])
        assert np.all(freqs[1:] / freqs[:-1] < 0.5)


class TestSerialization:
    @pytest.mark.parametrize("dist", FAMILIES, ids=repr)
    def test_round_trip(self, dist):
        assert from_dict(to_dict(dist)) == dist

    def test_json_shape(self):
        assert to_dict(Pareto(1, 3)) == {"family": "pareto", "params": {"scale": 1.0, "shape": 3.0}}

    def test_unknown_family(self):
        with pytest.raises(ValueError):
            from_dict({"family": "cauchy", "params": {}})

    @pytest.mark.parametrize("obj", [{"family": "gaussian", "params": {"stddev": 0}}, {"family": "exponential", "params": {"mean": -1}}])
    def test_bad_params(self, obj):
        with pytest.raises(ValueError):
            from_dict(obj)
