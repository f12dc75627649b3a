"""Mixture, discretization and reparametrization tests.

Key oracles: quadrature of the mixture density over age cells, direct
logistic/exp closed forms for the reparametrization, and hand-computed
multinomial probabilities.
"""

import numpy as np
import pytest
from scipy import integrate, stats
from scipy.special import expit

from mortmix import (AgeGrid, LatentState, MixtureParams, ModelVariant,
                     SkewNormalParams, discretize, discretize_batch,
                     from_unconstrained, mixture_cdf, multinomial_loglik,
                     natural_to_state, skew_normal_pdf, state_to_natural,
                     to_unconstrained)

GRID = AgeGrid()

ALL_VARIANTS = [
    ModelVariant(),
    ModelVariant(infant="half_normal"),
    ModelVariant(adult="none"),
    ModelVariant(old_age="scaled_beta"),
    ModelVariant(infant="half_normal", adult="none", old_age="scaled_beta"),
]


def default_params():
    return MixtureParams(0.35, 0.45, 48.0, 11.0, SkewNormalParams(82.0, 9.0, -3.0))


class TestAgeGrid:
    def test_shapes(self):
        assert GRID.n_cells == 111
        assert GRID.ages[0] == 0 and GRID.ages[-1] == 110
        np.testing.assert_allclose(GRID.interior_edges[:2], [0.5, 1.5])
        assert GRID.interior_edges.size == 110

    def test_minimal_grid(self):
        g = AgeGrid(1)
        assert g.n_cells == 2
        np.testing.assert_allclose(g.interior_edges, [0.5])

    def test_validation(self):
        with pytest.raises(ValueError):
            AgeGrid(0)


class TestReparametrization:
    def test_all_zero_state(self):
        p = from_unconstrained(np.zeros(7))
        assert p.pi1 == pytest.approx(0.5, abs=1e-16)
        assert p.pi2 == pytest.approx(0.25, abs=1e-16)
        assert p.pi0 == pytest.approx(0.25, abs=1e-16)
        assert p.sigma == 1.0 and p.sn.omega == 1.0

    def test_round_trip_random(self):
        rng = np.random.default_rng(7)
        for _ in range(10_000):
            s = rng.normal(scale=3.0, size=7)
            back = to_unconstrained(from_unconstrained(s))
            np.testing.assert_allclose(back, s, atol=1e-12, rtol=1e-12)

    def test_round_trip_natural_side(self):
        rng = np.random.default_rng(8)
        for _ in range(2000):
            w = rng.dirichlet([1.0, 1.0, 1.0])
            p = MixtureParams(w[1], w[2], rng.normal(50, 5), np.exp(rng.normal(2, 0.3)),
                              SkewNormalParams(rng.normal(80, 5), np.exp(rng.normal(2, 0.3)),
                                               rng.normal(0, 3)))
            q = from_unconstrained(to_unconstrained(p))
            assert q.pi1 == pytest.approx(p.pi1, abs=1e-12)
            assert q.pi2 == pytest.approx(p.pi2, abs=1e-12)
            assert q.sigma == pytest.approx(p.sigma, rel=1e-12)
            assert q.sn.alpha == pytest.approx(p.sn.alpha, abs=1e-12)

    def test_boundary_weight_errors(self):
        with pytest.raises(ValueError, match="pi1"):
            natural_to_state({"pi1": 0.0, "pi2": 0.5, "mu": 50, "sigma": 10,
                              "xi": 80, "omega": 8, "alpha": -1})
        with pytest.raises(ValueError, match="pi2"):
            natural_to_state({"pi1": 0.5, "pi2": 0.0, "mu": 50, "sigma": 10,
                              "xi": 80, "omega": 8, "alpha": -1})
        with pytest.raises(ValueError, match="pi0"):
            natural_to_state({"pi1": 0.5, "pi2": 0.5, "mu": 50, "sigma": 10,
                              "xi": 80, "omega": 8, "alpha": -1})

    def test_variant_layouts(self):
        assert ModelVariant().state_names == (
            "logit_pi1", "logit_pi2", "mu", "log_sigma", "xi", "log_omega", "alpha")
        assert ModelVariant(adult="none").state_names == (
            "logit_pi2", "xi", "log_omega", "alpha")
        assert ModelVariant(old_age="scaled_beta").state_names == (
            "logit_pi1", "logit_pi2", "mu", "log_sigma", "log_beta_a", "log_beta_b")
        assert ModelVariant(infant="half_normal").dim == 8

    @pytest.mark.parametrize("variant", ALL_VARIANTS, ids=str)
    def test_variant_round_trip(self, variant):
        rng = np.random.default_rng(11)
        for _ in range(2000):
            s = rng.normal(scale=2.0, size=variant.dim)
            nat = state_to_natural(s, variant)
            back = natural_to_state({k: float(v) for k, v in nat.items()}, variant)
            np.testing.assert_allclose(back, s, atol=1e-12, rtol=1e-12)

    def test_no_adult_logit_is_plain_logit(self):
        v = ModelVariant(adult="none")
        nat = state_to_natural(np.array([0.8, 80.0, 2.0, -1.0]), v)
        assert nat["pi2"] == pytest.approx(expit(0.8), abs=1e-16)
        assert nat["pi1"] == 0.0
        assert nat["pi0"] == pytest.approx(1.0 - expit(0.8), abs=1e-16)

    def test_latent_state_wrapper(self):
        s = LatentState(np.zeros(7))
        nat = s.natural()
        assert nat["pi1"] == 0.5
        with pytest.raises(ValueError):
            LatentState(np.zeros(6))
        with pytest.raises(ValueError):
            LatentState(np.full(7, np.nan))


class TestDiscretize:
    def test_simplex_exact_random_states(self):
        rng = np.random.default_rng(17)
        states = rng.normal(scale=3.0, size=(10_000, 7))
        probs = discretize_batch(states, ModelVariant(), GRID)
        assert probs.shape == (10_000, 111)
        assert np.all(probs >= 0.0)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)

    @pytest.mark.parametrize("variant", ALL_VARIANTS[1:], ids=str)
    def test_simplex_exact_variants(self, variant):
        rng = np.random.default_rng(19)
        states = rng.normal(scale=2.0, size=(2000, variant.dim))
        probs = discretize_batch(states, variant, GRID)
        assert np.all(probs >= 0.0)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)

    def test_cell_zero_contains_dirac_mass(self):
        p = default_params()
        probs = discretize(p)
        # the infant atom plus whatever continuous mass falls below 1/2
        assert probs[0] >= p.pi0

    def test_interior_cells_vs_quadrature(self):
        p = default_params()
        probs = discretize(p)

        def density(x):
            adult = p.pi1 * stats.norm.pdf(x, p.mu, p.sigma)
            old = p.pi2 * skew_normal_pdf(x, p.sn)
            return adult + old

        rng = np.random.default_rng(23)
        cells = rng.choice(np.arange(1, 110), size=20, replace=False)
        for x in cells:
            val, err = integrate.quad(density, x - 0.5, x + 0.5, epsabs=1e-13)
            assert err < 1e-11
            assert probs[x] == pytest.approx(val, abs=1e-10)

    def test_boundary_folding(self):
        p = default_params()
        probs = discretize(p)
        assert probs[0] == pytest.approx(float(mixture_cdf(0.5, p)), abs=1e-15)
        assert probs[110] == pytest.approx(1.0 - float(mixture_cdf(109.5, p)), abs=1e-15)

    def test_pure_adult_cell_value(self):
        # N(55, 10) with full weight on the adult component:
        # p_55 = Phi(0.05) - Phi(-0.05)
        state = natural_to_state({"pi1": 1 - 2e-13, "pi2": 1e-13, "mu": 55.0,
                                  "sigma": 10.0, "xi": 80.0, "omega": 8.0,
                                  "alpha": 0.0})
        probs = discretize_batch(state[None, :], ModelVariant(), GRID)[0]
        expected = stats.norm.cdf(0.05) - stats.norm.cdf(-0.05)
        assert probs[55] == pytest.approx(expected, rel=1e-9)

    def test_no_adult_equals_analytic_two_component(self):
        v = ModelVariant(adult="none")
        rng = np.random.default_rng(29)
        for _ in range(50):
            s = rng.normal(scale=1.5, size=4)
            probs = discretize_batch(s[None, :], v, GRID)[0]
            pi2 = expit(s[0])
            pi0 = 1.0 - pi2
            sn = SkewNormalParams(s[1], np.exp(s[2]), s[3])
            from mortmix import skew_normal_cdf
            edges = GRID.interior_edges
            cdf = pi0 * 1.0 + pi2 * skew_normal_cdf(edges, sn)  # dirac cdf = 1 for x >= 0
            expected = np.empty(111)
            expected[0] = cdf[0]
            expected[1:-1] = np.diff(cdf)
            expected[-1] = 1.0 - cdf[-1]
            expected = np.maximum(expected, 0.0)
            np.testing.assert_array_equal(probs, expected)

    def test_half_normal_infant_mass_decays(self):
        v = ModelVariant(infant="half_normal")
        # tiny gamma concentrates infant mass in cell 0
        s = np.array([0.0, 0.0, 50.0, np.log(10.0), 80.0, np.log(8.0), 0.0, np.log(0.1)])
        probs = discretize_batch(s[None, :], v, GRID)[0]
        nat = state_to_natural(s, v)
        assert probs[0] >= float(nat["pi0"]) * 0.999

    def test_scaled_beta_support(self):
        v = ModelVariant(old_age="scaled_beta")
        # all old-age mass inside [75, 110]
        s = natural_to_state({"pi1": 1e-12, "pi2": 1.0 - 2e-12, "mu": 50.0,
                              "sigma": 1.0, "beta_a": 3.0, "beta_b": 2.0}, v)
        probs = discretize_batch(s[None, :], v, GRID)[0]
        assert probs[1:75].sum() < 1e-9
        assert probs[75:].sum() == pytest.approx(1.0, abs=1e-9)
        # Beta(3, 2) cdf at midpoint of [75, 110] via the regularized incomplete beta
        from scipy.special import betainc
        x = 92.5
        u = (x - 75.0) / 35.0
        assert float(mixture_cdf(x, {"pi1": 0.0, "pi2": 1.0, "mu": 50.0,
                                     "sigma": 1.0, "beta_a": 3.0,
                                     "beta_b": 2.0}, v)) == pytest.approx(
            betainc(3.0, 2.0, u), abs=1e-14)

    def test_loglik_continuity_under_step_halving(self):
        # central differences at h and h/2 must agree (no hidden kinks)
        rng = np.random.default_rng(31)
        base = np.array([0.5, 0.2, 48.0, np.log(11.0), 82.0, np.log(9.0), -2.0])
        deaths = rng.multinomial(50_000, discretize_batch(base[None], ModelVariant(), GRID)[0])

        def loglik(s):
            probs = discretize_batch(s[None], ModelVariant(), GRID)[0]
            return multinomial_loglik(deaths, probs)

        for k in range(7):
            for h in (1e-4, 5e-5):
                e = np.zeros(7)
                e[k] = h
                g1 = (loglik(base + e) - loglik(base - e)) / (2 * h)
                e[k] = h / 2
                g2 = (loglik(base + e) - loglik(base - e)) / h
                assert g1 == pytest.approx(g2, rel=5e-4, abs=5e-4)


class TestMultinomial:
    def test_hand_computed_value(self):
        # C(3; 2,1) * 0.25^2 * 0.75 = 3 * 0.046875 = 0.140625
        ll = multinomial_loglik(np.array([2, 1]), np.array([0.25, 0.75]))
        assert ll == pytest.approx(np.log(0.140625), abs=1e-14)

    def test_zero_count_zero_prob_ok(self):
        ll = multinomial_loglik(np.array([0, 3]), np.array([0.0, 1.0]))
        assert ll == pytest.approx(0.0, abs=1e-14)

    def test_positive_count_zero_prob_is_neg_inf(self):
        ll = multinomial_loglik(np.array([1, 2]), np.array([0.0, 1.0]))
        assert ll == -np.inf

    def test_permutation_invariance(self):
        rng = np.random.default_rng(37)
        d = rng.integers(0, 100, size=20)
        p = rng.dirichlet(np.ones(20))
        base = multinomial_loglik(d, p)
        for _ in range(10):
            perm = rng.permutation(20)
            assert multinomial_loglik(d[perm], p[perm]) == pytest.approx(base, abs=1e-10)

    def test_agrees_with_scipy(self):
        rng = np.random.default_rng(41)
        p = rng.dirichlet(np.ones(8))
        d = rng.multinomial(1000, p)
        expected = stats.multinomial.logpmf(d, 1000, p)
        assert multinomial_loglik(d, p) == pytest.approx(expected, rel=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            multinomial_loglik(np.array([1, 2, 3]), np.array([0.5, 0.5]))
        with pytest.raises(ValueError):
            multinomial_loglik(np.array([1, -2]), np.array([0.5, 0.5]))
        with pytest.raises(ValueError):
            multinomial_loglik(np.array([1.5, 2.0]), np.array([0.5, 0.5]))
        with pytest.raises(ValueError):
            multinomial_loglik(np.array([1, 2]), np.array([0.6, 0.6]))


class TestMixtureCdf:
    def test_weights_recombine(self):
        p = default_params()
        x = np.linspace(-5, 120, 300)
        total = mixture_cdf(x, p)
        infant = (x >= 0).astype(float)
        adult = stats.norm.cdf(x, p.mu, p.sigma)
        from mortmix import skew_normal_cdf
        old = skew_normal_cdf(x, p.sn)
        np.testing.assert_allclose(total, np.clip(
            p.pi0 * infant + p.pi1 * adult + p.pi2 * old, 0, 1), atol=1e-14)

    def test_limits(self):
        p = default_params()
        # continuous components keep full real support; mass below 1/2 is
        # folded into cell 0 by discretization
        assert float(mixture_cdf(-1e9, p)) == 0.0
        assert float(mixture_cdf(-1.0, p)) < 1e-5
        assert float(mixture_cdf(1e9, p)) == pytest.approx(1.0, abs=1e-12)

    def test_mixture_params_rejects_other_variants(self):
        with pytest.raises(ValueError):
            mixture_cdf(50.0, default_params(), ModelVariant(adult="none"))
