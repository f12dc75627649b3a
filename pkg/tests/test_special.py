"""Oracle tests for the Gaussian / Owen's T / skew-normal kernels.

Oracles are independent of the implementation: adaptive quadrature of
defining integrals, closed-form identities and Monte Carlo moments.
"""

import numpy as np
import pytest
from scipy import integrate
from scipy import stats

from mortmix import (SkewNormalParams, gaussian_cdf, gaussian_logcdf,
                     gaussian_pdf, owen_t, skew_normal_cdf,
                     skew_normal_moments, skew_normal_pdf)


def owen_t_quadrature(h, a):
    """Defining integral, evaluated with adaptive quadrature."""
    if a == 0.0:
        return 0.0
    sign = 1.0 if a > 0 else -1.0
    upper = abs(a)

    def integrand(x):
        return np.exp(-0.5 * h * h * (1.0 + x * x)) / (1.0 + x * x)

    val, err = integrate.quad(integrand, 0.0, upper, epsabs=1e-14, epsrel=1e-13, limit=200)
    assert err < 1e-12
    return sign * val / (2.0 * np.pi)


class TestGaussian:
    def test_pdf_known_values(self):
        assert gaussian_pdf(0.0) == pytest.approx(1.0 / np.sqrt(2 * np.pi), abs=1e-16)
        assert gaussian_pdf(1.0) == pytest.approx(0.24197072451914337, abs=1e-16)
        z = np.linspace(-6, 6, 41)
        np.testing.assert_allclose(gaussian_pdf(z), stats.norm.pdf(z), rtol=1e-14)

    def test_cdf_known_values(self):
        assert gaussian_cdf(0.0) == 0.5
        assert gaussian_cdf(1.96) == pytest.approx(0.9750021048517795, abs=1e-15)
        # exact at the extremes, never outside [0, 1]
        assert gaussian_cdf(-40.0) == 0.0
        assert gaussian_cdf(40.0) == 1.0
        assert gaussian_cdf(10.0) <= 1.0
        assert 1.0 - gaussian_cdf(10.0) < 1e-20

    def test_cdf_monotone(self):
        z = np.linspace(-20, 20, 2001)
        c = gaussian_cdf(z)
        assert np.all(np.diff(c) >= 0.0)

    def test_logcdf_tail(self):
        # stable where the plain cdf underflows
        assert np.isfinite(gaussian_logcdf(-40.0))
        assert gaussian_logcdf(-40.0) == pytest.approx(stats.norm.logcdf(-40.0), rel=1e-12)


class TestOwenT:
    def test_identities(self):
        h = np.linspace(-5, 5, 21)
        np.testing.assert_allclose(owen_t(h, 0.0), 0.0, atol=1e-300)
        a = np.linspace(-8, 8, 33)
        np.testing.assert_allclose(owen_t(0.0, a), np.arctan(a) / (2 * np.pi), atol=1e-13)
        phi = gaussian_cdf(h)
        np.testing.assert_allclose(owen_t(h, 1.0), 0.5 * phi * (1.0 - phi), atol=1e-13)
        # sign symmetries
        np.testing.assert_allclose(owen_t(-h, 2.3), owen_t(h, 2.3), atol=1e-16)
        np.testing.assert_allclose(owen_t(h, -2.3), -owen_t(h, 2.3), atol=1e-16)

    def test_infinite_a_limit(self):
        h = np.array([-3.0, -0.5, 0.0, 0.7, 4.2])
        expected = 0.5 * (1.0 - gaussian_cdf(np.abs(h)))
        np.testing.assert_allclose(owen_t(h, np.inf), expected, atol=1e-15)
        np.testing.assert_allclose(owen_t(h, -np.inf), -expected, atol=1e-15)

    def test_against_quadrature_grid(self):
        hs = np.linspace(-4, 4, 9)
        aa = np.linspace(-6, 6, 9)
        for h in hs:
            for a in aa:
                assert owen_t(h, a) == pytest.approx(owen_t_quadrature(h, a), abs=1e-12)


class TestSkewNormal:
    def test_params_validation(self):
        with pytest.raises(ValueError):
            SkewNormalParams(0.0, 0.0, 1.0)
        with pytest.raises(ValueError):
            SkewNormalParams(0.0, -1.0, 1.0)
        with pytest.raises(ValueError):
            SkewNormalParams(np.nan, 1.0, 1.0)

    def test_alpha_zero_reduces_to_normal(self):
        p = SkewNormalParams(2.0, 3.0, 0.0)
        x = np.linspace(-10, 14, 49)
        np.testing.assert_allclose(skew_normal_pdf(x, p),
                                   stats.norm.pdf(x, 2.0, 3.0), rtol=1e-13)
        np.testing.assert_allclose(skew_normal_cdf(x, p),
                                   stats.norm.cdf(x, 2.0, 3.0), atol=1e-14)

    def test_cdf_at_location(self):
        # F(xi) = 1/2 - arctan(alpha)/pi
        for alpha in (-10.0, -2.0, 0.0, 1.0, 2.0, 10.0):
            p = SkewNormalParams(5.0, 2.0, alpha)
            expected = 0.5 - np.arctan(alpha) / np.pi
            assert skew_normal_cdf(5.0, p) == pytest.approx(expected, abs=1e-14)
        assert skew_normal_cdf(0.0, SkewNormalParams(0.0, 1.0, 1.0)) == pytest.approx(0.25, abs=1e-15)

    @staticmethod
    def _cdf_quadrature(x, p):
        """Panel-wise quadrature of the pdf; per-panel errors sum."""
        z_hi = (x - p.xi) / p.omega
        # fine panels near z = 0 where Phi(alpha z) moves fastest
        grid = np.concatenate([np.arange(-40.0, -2.0, 1.0),
                               np.arange(-2.0, 2.0, 0.125),
                               np.arange(2.0, 41.0, 1.0)])
        edges = grid[grid < min(z_hi, 40.0)]
        edges = np.append(edges, min(z_hi, 40.0))
        total, err_total = 0.0, 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            if b <= a:
                continue
            val, err = integrate.quad(lambda u: skew_normal_pdf(u, p),
                                      p.xi + a * p.omega, p.xi + b * p.omega,
                                      epsabs=1e-14, limit=100)
            total += val
            err_total += err
        return total, err_total

    def test_cdf_vs_pdf_quadrature(self):
        for alpha in (-10.0, -2.0, 0.0, 2.0, 10.0):
            p = SkewNormalParams(1.0, 2.0, alpha)
            for x in (-4.0, 0.0, 1.0, 3.5, 8.0):
                val, err = self._cdf_quadrature(x, p)
                # oracle error must stay well below the comparison tolerance
                assert err < 1e-11
                assert skew_normal_cdf(x, p) == pytest.approx(val, abs=1e-10)

    def test_pdf_integrates_to_one(self):
        p = SkewNormalParams(-1.0, 0.5, 4.0)
        val, _ = integrate.quad(lambda u: skew_normal_pdf(u, p), -np.inf, np.inf,
                                epsabs=1e-13, limit=300)
        assert val == pytest.approx(1.0, abs=1e-11)

    def test_moments_closed_form(self):
        # alpha = 1: delta = 1/sqrt(2), mean = sqrt(1/pi), var = 1 - 1/pi
        mean, sd = skew_normal_moments(SkewNormalParams(0.0, 1.0, 1.0))
        assert mean == pytest.approx(np.sqrt(1.0 / np.pi), abs=1e-15)
        assert sd == pytest.approx(np.sqrt(1.0 - 1.0 / np.pi), abs=1e-15)
        mean0, sd0 = skew_normal_moments(SkewNormalParams(3.0, 2.5, 0.0))
        assert mean0 == 3.0
        assert sd0 == 2.5

    def test_moments_vs_monte_carlo(self):
        # MC oracle via the (delta Z1 + sqrt(1-delta^2) Z2 | Z1 > 0) construction
        rng = np.random.default_rng(20260817)
        n = 1_000_000
        for alpha in (-5.0, -1.0, 0.5, 3.0):
            pars = SkewNormalParams(1.5, 2.0, alpha)
            delta = alpha / np.sqrt(1 + alpha * alpha)
            z1 = np.abs(rng.standard_normal(n))
            z2 = rng.standard_normal(n)
            x = pars.xi + pars.omega * (delta * z1 + np.sqrt(1 - delta * delta) * z2)
            mean, sd = skew_normal_moments(pars)
            mc_mean = x.mean()
            mc_sd = x.std(ddof=1)
            se_mean = mc_sd / np.sqrt(n)
            assert abs(mean - mc_mean) < 4.0 * se_mean
            # sd of the sd estimate, normal-ish approximation
            se_sd = mc_sd / np.sqrt(2.0 * (n - 1))
            assert abs(sd - mc_sd) < 4.0 * se_sd

    def test_moments_extreme_alpha_stable(self):
        mean, sd = skew_normal_moments(SkewNormalParams(0.0, 1.0, 1e160))
        assert np.isfinite(mean) and np.isfinite(sd)
        assert mean == pytest.approx(np.sqrt(2.0 / np.pi), rel=1e-12)

    def test_cdf_monotone_and_bounded(self):
        p = SkewNormalParams(0.0, 1.0, -7.0)
        x = np.linspace(-12, 12, 4001)
        c = skew_normal_cdf(x, p)
        # monotone up to sub-ulp rounding wiggle near saturation
        assert np.all(np.diff(c) >= -5e-16)
        assert np.all((c >= 0.0) & (c <= 1.0))
