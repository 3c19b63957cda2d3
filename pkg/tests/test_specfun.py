import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import beta as beta_fn

from abforecast.specfun import (
    DomainError,
    log_beta,
    log_binom_nb,
    log_gamma,
    log_gamma_ratio,
    psi,
    trunc_geom_pmf,
)


def mp_psi(x, y, alpha, r):
    """Reference psi from the gamma-ratio form at 50 digits."""
    mpmath.mp.dps = 50
    a = mpmath.mpf(alpha)
    tb = mpmath.mpf(r) * (mpmath.mpf(x) + mpmath.mpf(y))
    ta = mpmath.mpf(r) * mpmath.mpf(x)
    val = mpmath.gamma(1 - a) * (
        mpmath.gamma(tb + 1) / mpmath.gamma(tb + 1 - a)
        - mpmath.gamma(ta + 1) / mpmath.gamma(ta + 1 - a)
    )
    return float(val)


class TestLogGamma:
    def test_examples(self):
        assert log_gamma(1.0) == 0.0
        assert log_gamma(0.5) == pytest.approx(0.5 * math.log(math.pi), rel=1e-14)
        assert log_gamma(10.0) == pytest.approx(math.log(362880), rel=1e-14)

    def test_relative_accuracy_on_range(self):
        mpmath.mp.dps = 40
        for x in np.geomspace(1e-3, 1e6, 60):
            ref = float(mpmath.loggamma(mpmath.mpf(float(x))))
            got = log_gamma(x)
            assert abs(got - ref) <= 1e-12 * max(abs(ref), 1e-300) + 1e-15

    def test_domain(self):
        with pytest.raises(DomainError):
            log_gamma(0.0)
        with pytest.raises(DomainError):
            log_gamma(-1.5)

    def test_vectorised(self):
        out = log_gamma(np.array([1.0, 2.0, 3.0]))
        assert np.allclose(out, [0.0, 0.0, math.log(2.0)])


class TestLogGammaRatio:
    @pytest.mark.parametrize("z", [1e-3, 0.3, 7.0, 49.9, 50.0, 123.4, 1e4, 1e7])
    @pytest.mark.parametrize("a", [-0.99, -0.5, 0.01, 0.5, 0.99, 3.0])
    def test_against_mpmath(self, z, a):
        if z + a <= 0:
            pytest.skip("outside domain")
        mpmath.mp.dps = 50
        zz, aa = mpmath.mpf(z), mpmath.mpf(a)
        ref = float(mpmath.loggamma(zz + aa) - mpmath.loggamma(zz))
        got = log_gamma_ratio(z, a)
        assert abs(got - ref) <= 1e-12 * max(1.0, abs(ref))

    def test_domain(self):
        with pytest.raises(DomainError):
            log_gamma_ratio(0.5, -0.6)


class TestLogBeta:
    def test_examples(self):
        assert log_beta(1, 1) == pytest.approx(0.0, abs=1e-15)
        assert log_beta(0.5, 2) == pytest.approx(math.log(4 / 3), rel=1e-13)
        assert log_beta(0.5, 3) == pytest.approx(math.log(16 / 15), rel=1e-12)

    def test_symmetric(self):
        rng = np.random.default_rng(0)
        a, b = rng.uniform(0.01, 500, 200), rng.uniform(0.01, 500, 200)
        assert np.allclose(log_beta(a, b), log_beta(b, a), rtol=0, atol=1e-12)

    def test_matches_scipy_beta(self):
        a = np.array([0.3, 1.5, 4.0, 20.0])
        b = np.array([2.0, 0.7, 9.0, 3.5])
        assert np.allclose(np.exp(log_beta(a, b)), beta_fn(a, b), rtol=1e-12)

    def test_large_second_argument(self):
        mpmath.mp.dps = 50
        ref = float(mpmath.log(mpmath.beta(mpmath.mpf("0.5"), mpmath.mpf(10) ** 8)))
        assert log_beta(0.5, 1e8) == pytest.approx(ref, rel=1e-13)

    @pytest.mark.parametrize("a,b", [(0.0, 1.0), (1.0, -2.0)])
    def test_domain(self, a, b):
        with pytest.raises(DomainError):
            log_beta(a, b)


class TestLogBinomNB:
    def test_integer_r_is_binomial(self):
        for a in range(6):
            for r in range(1, 5):
                assert math.exp(log_binom_nb(a, r)) == pytest.approx(math.comb(a + r - 1, a))

    def test_zero_count(self):
        assert log_binom_nb(0, 2.7) == pytest.approx(0.0, abs=1e-14)


class TestPsi:
    def test_examples(self):
        assert psi(0, 0, 0.5) == 0.0
        assert psi(0, 2, 0.5) == pytest.approx(5 / 3, rel=1e-14)
        assert psi(2, 1, 0.5) == pytest.approx(8 / 15, rel=1e-13)
        assert psi(0, 3, 0.5) == pytest.approx(2.2, rel=1e-14)

    def test_zero_step(self):
        assert psi(7.0, 0.0, 0.3, 2.0) == 0.0

    def test_telescoping_identity(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            alpha = rng.uniform(0.01, 0.99)
            r = float(rng.integers(1, 6))
            x = int(rng.integers(0, 400))
            y = int(rng.integers(1, 60))
            js = np.arange(1, int(r * y) + 1)
            ref = alpha * math.fsum(beta_fn(1 - alpha, r * x + js).tolist())
            assert psi(x, y, alpha, r) == pytest.approx(ref, rel=1e-10)

    def test_matches_direct_negative_beta(self):
        # alpha [B(rx + 1, -alpha) - B(r(x+y) + 1, -alpha)] with Gamma(-alpha) = Gamma(1-alpha)/(-alpha)
        rng = np.random.default_rng(3)
        for _ in range(100):
            alpha = rng.uniform(0.05, 0.95)
            r = rng.uniform(0.2, 4.0)
            x, y = rng.uniform(0, 30), rng.uniform(0.1, 30)
            g = math.gamma(1 - alpha) / -alpha

            def b_neg(t):
                return math.gamma(t) * g / math.gamma(t - alpha)

            direct = alpha * (b_neg(r * x + 1) - b_neg(r * (x + y) + 1))
            assert psi(x, y, alpha, r) == pytest.approx(direct, rel=1e-10)

    @pytest.mark.parametrize(
        "x,y,alpha,r",
        [(0, 1e-8, 0.5, 1.0), (1e6, 1, 0.3, 1.0), (1e8, 2, 0.9, 3.0), (5, 1e7, 0.01, 0.5),
         (123.5, 0.25, 0.99, 7.0), (0, 1e9, 0.7, 1.0)],
    )
    def test_extreme_arguments(self, x, y, alpha, r):
        assert psi(x, y, alpha, r) == pytest.approx(mp_psi(x, y, alpha, r), rel=1e-11)

    def test_vectorised(self):
        y = np.arange(0, 5)
        out = psi(3.0, y, 0.4)
        assert out.shape == (5,)
        assert out[0] == 0.0
        assert np.all(np.diff(out) > 0)

    @settings(max_examples=100, deadline=None)
    @given(
        alpha=st.floats(0.01, 0.99),
        r=st.floats(0.05, 20.0),
        x=st.floats(0.0, 1e4),
        y=st.floats(0.01, 1e3),
    )
    def test_monotone(self, alpha, r, x, y):
        base = psi(x, y, alpha, r)
        assert base > 0
        assert psi(x, 1.5 * y, alpha, r) > base
        assert psi(x + 1.0 + x, y, alpha, r) < base

    @pytest.mark.parametrize("kw", [dict(alpha=0.0), dict(alpha=1.0), dict(r=0.0),
                                    dict(x=-1.0), dict(y=-0.5)])
    def test_domain(self, kw):
        args = dict(x=1.0, y=1.0, alpha=0.5, r=1.0)
        args.update(kw)
        with pytest.raises(DomainError):
            psi(**args)


class TestTruncGeomPmf:
    def test_examples(self):
        assert trunc_geom_pmf(0.5, 1, 2) == 0.5
        assert trunc_geom_pmf(0.5, 2, 2) == 0.25
        assert trunc_geom_pmf(0.5, 0, 2) == 0.25
        assert trunc_geom_pmf(0.5, 3, 2) == 0.0

    def test_normalised(self):
        rng = np.random.default_rng(5)
        for _ in range(1000):
            theta = rng.uniform(1e-6, 1 - 1e-6)
            D = int(rng.integers(1, 200))
            total = math.fsum(trunc_geom_pmf(theta, np.arange(D + 1), D).tolist())
            assert total == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("theta", [0.0, 1.0, -0.1])
    def test_domain(self, theta):
        with pytest.raises(DomainError):
            trunc_geom_pmf(theta, 1, 3)
