"""Forecast and life-table tests.

Life-table columns are pinned by hand-computable distributions (atoms,
two-point supports) and the exact accounting identity
sum_x d_x (x + 1/2) = e_0.  Forecast simulation is checked against the
analytic mean and variance of the random walk it extends.
"""

import numpy as np
import pandas as pd
import pytest

from mortmix import (AgeGrid, ForecastConfig, FunctionalBands, InnovationLaw,
                     ModelVariant, PosteriorDraws, SamplerConfig,
                     forecast_states, functional_bands, life_table,
                     life_table_batch, parameter_bands, summarize,
                     write_band_table)

BASE_STATE = np.array([2.0, 2.0, 45.0, np.log(12.0), 80.0, np.log(10.0), -2.0])


def fake_draws(n_stored=200, p=1, T=3, years=None, beta=None, eta2=None,
               theta_vec=None, jitter=0.0, seed=0,
               innovation=InnovationLaw()):
    """PosteriorDraws with constant (or slightly jittered) content."""
    variant = ModelVariant()
    k = variant.dim
    rng = np.random.default_rng(seed)
    theta_vec = BASE_STATE if theta_vec is None else np.asarray(theta_vec)
    theta = np.broadcast_to(theta_vec, (1, n_stored, p, T + 1, k)).copy()
    if jitter:
        theta += jitter * rng.standard_normal(theta.shape)
    beta = np.zeros((p, k)) if beta is None else np.asarray(beta, dtype=np.float64)
    eta2 = np.full((p, k), 1e-4) if eta2 is None else np.asarray(eta2, dtype=np.float64)
    years = np.arange(2001, 2001 + T) if years is None else np.asarray(years)
    cfg = SamplerConfig(n_iter=2 * n_stored, burn_in=n_stored, seed=seed,
                        innovation=innovation)
    return PosteriorDraws(
        theta=theta,
        beta=np.broadcast_to(beta, (1, n_stored, p, k)).copy(),
        eta2=np.broadcast_to(eta2, (1, n_stored, p, k)).copy(),
        loglik=np.zeros((1, n_stored)),
        countries=[f"c{j}" for j in range(p)],
        years=years,
        param_names=variant.state_names,
        config=cfg,
        acceptance_rates=np.zeros((1, 1)),
        block_labels=["t1.logit_pi1"],
    )


class TestLifeTable:
    def test_expectancy_identity_random_simplices(self):
        rng = np.random.default_rng(0)
        n_cells = AgeGrid().n_cells
        d = rng.dirichlet(np.full(n_cells, 0.3), size=1000)
        ages = np.arange(n_cells)
        e0 = life_table_batch(d)["e"][:, 0]
        direct = (d * (ages + 0.5)).sum(axis=1)
        np.testing.assert_allclose(e0, direct, atol=1e-10)

    def test_atom_at_80(self):
        d = np.zeros(111)
        d[80] = 1.0
        lt = life_table(d)
        assert lt.e[0] == 80.5
        assert lt.q[80] == 1.0
        np.testing.assert_array_equal(lt.l[:81], 1.0)
        np.testing.assert_array_equal(lt.l[81:], 0.0)

    def test_two_point_support(self):
        d = np.zeros(111)
        d[0] = d[1] = 0.5
        lt = life_table(d)
        assert lt.e[0] == pytest.approx(1.0, abs=1e-15)
        assert lt.q[0] == 0.5
        assert lt.q[1] == 1.0
        assert lt.e[1] == pytest.approx(0.5, abs=1e-15)
        assert lt.L[0] == 0.75
        assert lt.L[1] == 0.25
        assert lt.m[0] == pytest.approx(0.5 / 0.75)

    def test_nan_beyond_support(self):
        d = np.zeros(111)
        d[3] = 1.0
        lt = life_table(d)
        assert np.all(np.isnan(lt.q[4:]))
        assert np.all(np.isnan(lt.m[4:]))
        assert np.all(np.isnan(lt.e[4:]))
        assert lt.e[0] == pytest.approx(3.5)
        assert lt.e[3] == pytest.approx(0.5)
        assert lt.m[3] == pytest.approx(2.0)

    def test_zero_person_years_gives_infinite_rate(self):
        d = np.zeros(4)
        d[0] = 1.0
        cols = life_table_batch(d, a=1.0)
        assert cols["L"][0] == 0.0
        assert cols["m"][0] == np.inf
        assert cols["q"][0] == 1.0

    def test_batch_matches_single(self):
        rng = np.random.default_rng(2)
        d = rng.dirichlet(np.ones(30), size=8)
        cols = life_table_batch(d)
        for i in range(8):
            lt = life_table(d[i])
            for key in ("l", "L", "q", "m", "e"):
                np.testing.assert_array_equal(getattr(lt, key), cols[key][i])

    def test_validation(self):
        with pytest.raises(ValueError):
            life_table(np.ones(10))  # not a simplex
        with pytest.raises(ValueError):
            life_table(np.ones((2, 10)) / 10)

    def test_nonuniform_a(self):
        d = np.zeros(5)
        d[1] = 1.0
        a = np.array([0.5, 0.1, 0.5, 0.5, 0.5])
        cols = life_table_batch(d, a=a)
        assert cols["L"][1] == pytest.approx(0.9)
        assert cols["e"][0] == pytest.approx(1.0 + 0.9)


class TestSummarize:
    def test_median_interpolates(self):
        x = np.arange(1.0, 101.0)
        out = summarize(x[:, None], quantiles=(0.5,))
        assert out[0, 0] == 50.5

    def test_shape_and_order(self):
        rng = np.random.default_rng(3)
        vals = rng.standard_normal((500, 4, 6))
        out = summarize(vals, quantiles=(0.05, 0.5, 0.95))
        assert out.shape == (3, 4, 6)
        assert np.all(out[0] <= out[1]) and np.all(out[1] <= out[2])

    def test_validation(self):
        with pytest.raises(ValueError):
            summarize(np.zeros((10, 2)), quantiles=(0.0, 0.5))


class TestForecastConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            ForecastConfig(horizon=0)
        with pytest.raises(ValueError):
            ForecastConfig(horizon=5, quantiles=(0.5, 0.5))
        with pytest.raises(ValueError):
            ForecastConfig(horizon=5, quantiles=(0.1, 1.5))
        assert ForecastConfig(horizon=3).quantiles == (0.05, 0.5, 0.95)


class TestForecastStates:
    def test_shapes_and_determinism(self):
        draws = fake_draws(n_stored=50, p=2, T=3)
        cfg = ForecastConfig(horizon=4)
        out1 = forecast_states(draws, cfg, rng=123)
        out2 = forecast_states(draws, cfg, rng=123)
        assert out1.shape == (1, 50, 2, 4, 7)
        np.testing.assert_array_equal(out1, out2)
        out3 = forecast_states(draws, cfg, rng=124)
        assert not np.array_equal(out1, out3)

    def test_random_walk_moments(self):
        n = 40_000
        beta_val, eta2_val = 0.2, 0.05
        draws = fake_draws(n_stored=n, p=1, T=2,
                           beta=np.full((1, 7), beta_val),
                           eta2=np.full((1, 7), eta2_val))
        out = forecast_states(draws, ForecastConfig(horizon=5), rng=7)
        last = draws.theta[0, 0, 0, -1, :]
        for h in (0, 4):
            sample = out[0, :, 0, h, :]  # (n, 7)
            expected_mean = last + (h + 1) * beta_val
            expected_var = (h + 1) * eta2_val
            se_mean = np.sqrt(expected_var / n)
            assert np.all(np.abs(sample.mean(axis=0) - expected_mean) < 4 * se_mean)
            se_var = expected_var * np.sqrt(2.0 / (n - 1))
            assert np.all(np.abs(sample.var(axis=0, ddof=1) - expected_var) < 4 * se_var)

    def test_variance_grows_with_horizon(self):
        draws = fake_draws(n_stored=5000, p=1, T=2, eta2=np.full((1, 7), 0.1))
        out = forecast_states(draws, ForecastConfig(horizon=6), rng=11)
        v1 = out[0, :, 0, 0, :].var(axis=0)
        v6 = out[0, :, 0, 5, :].var(axis=0)
        assert np.all(v6 > 3.0 * v1)

    def test_student_t_innovation_variance(self):
        # standard t(5) has variance 5/3, inflating each step accordingly
        n = 60_000
        draws = fake_draws(n_stored=n, p=1, T=2, eta2=np.full((1, 7), 0.04),
                           innovation=InnovationLaw("student_t", dof=5.0))
        out = forecast_states(draws, ForecastConfig(horizon=1), rng=13)
        sample = out[0, :, 0, 0, 0]
        target = 0.04 * 5.0 / 3.0
        assert sample.var(ddof=1) == pytest.approx(target, rel=0.1)


class TestFunctionalBands:
    def test_degenerate_draws_reproduce_functional(self):
        from mortmix import discretize_batch
        draws = fake_draws(n_stored=40, p=2, T=3)
        grid = AgeGrid()
        probs = discretize_batch(BASE_STATE[None, :], ModelVariant(), grid)[0]
        expected = {
            "age_at_death": probs,
            "qx": life_table_batch(probs)["q"],
            "ex": life_table_batch(probs)["e"],
        }
        for quantity, want in expected.items():
            bands = functional_bands(draws, quantity)
            assert bands.values.shape == (3, 2, 3, 111)
            np.testing.assert_array_equal(bands.in_sample, True)
            np.testing.assert_array_equal(bands.years, draws.years)
            for iq in range(3):
                for j in range(2):
                    for t in range(3):
                        np.testing.assert_allclose(bands.values[iq, j, t], want,
                                                   rtol=0, atol=1e-12, equal_nan=True)

    def test_forecast_extends_year_axis(self):
        draws = fake_draws(n_stored=30, p=1, T=3, years=[2000, 2005, 2010])
        fc = forecast_states(draws, ForecastConfig(horizon=2), rng=5)
        bands = functional_bands(draws, "ex", forecast=fc)
        np.testing.assert_array_equal(bands.years,
                                      [2000, 2005, 2010, 2015, 2020])
        np.testing.assert_array_equal(bands.in_sample,
                                      [True, True, True, False, False])
        assert bands.values.shape == (3, 1, 5, 111)

    def test_chunking_invariant(self):
        draws = fake_draws(n_stored=37, p=2, T=2, jitter=0.02, seed=9)
        a = functional_bands(draws, "mx", chunk=1)
        b = functional_bands(draws, "mx", chunk=1024)
        np.testing.assert_array_equal(a.values, b.values)

    def test_band_ordering_with_spread(self):
        draws = fake_draws(n_stored=300, p=1, T=2, jitter=0.05, seed=4)
        bands = functional_bands(draws, "ex")
        lo, mid, hi = bands.values
        assert np.all(lo <= mid) and np.all(mid <= hi)
        assert np.any(lo < hi)

    def test_unknown_quantity(self):
        draws = fake_draws(n_stored=10)
        with pytest.raises(ValueError):
            functional_bands(draws, "lx")


class TestParameterBands:
    def test_degenerate_draws_reproduce_parameters(self):
        from scipy.special import expit
        draws = fake_draws(n_stored=25, p=1, T=2)
        out = parameter_bands(draws)
        pi1 = expit(BASE_STATE[0])
        pi2 = (1.0 - pi1) * expit(BASE_STATE[1])
        assert out["pi1"].values[1, 0, 0, 0] == pytest.approx(pi1, abs=1e-15)
        assert out["pi2"].values[1, 0, 0, 0] == pytest.approx(pi2, abs=1e-15)
        assert out["mu"].values[1, 0, 0, 0] == 45.0
        alpha = BASE_STATE[6]
        omega = np.exp(BASE_STATE[5])
        delta = alpha / np.hypot(1.0, alpha)
        want_mean = BASE_STATE[4] + omega * delta * np.sqrt(2.0 / np.pi)
        want_sd = omega * np.sqrt(1.0 - 2.0 * delta ** 2 / np.pi)
        assert out["old_age_mean"].values[1, 0, 0, 0] == pytest.approx(want_mean, rel=1e-14)
        assert out["old_age_sd"].values[1, 0, 0, 0] == pytest.approx(want_sd, rel=1e-14)
        assert out["pi1"].ages is None
        assert out["pi1"].values.shape == (3, 1, 2, 1)

    def test_scaled_beta_variant_has_no_skew_summaries(self):
        variant = ModelVariant(old_age="scaled_beta")
        k = variant.dim
        cfg = SamplerConfig(n_iter=20, burn_in=10, variant=variant)
        theta = np.zeros((1, 10, 1, 3, k))
        draws = PosteriorDraws(
            theta=theta, beta=np.zeros((1, 10, 1, k)),
            eta2=np.full((1, 10, 1, k), 1e-4), loglik=np.zeros((1, 10)),
            countries=["c0"], years=np.arange(2000, 2002),
            param_names=variant.state_names, config=cfg,
            acceptance_rates=np.zeros((1, 1)), block_labels=["x"])
        out = parameter_bands(draws)
        assert "old_age_mean" not in out
        assert "beta_a" in out or "log_beta_a" in out or len(out) >= k


class TestWriteBandTable:
    def test_round_trip_structure(self, tmp_path):
        draws = fake_draws(n_stored=20, p=2, T=2)
        bands = functional_bands(draws, "ex", quantiles=(0.1, 0.9))
        params = parameter_bands(draws, quantiles=(0.5,))
        path = tmp_path / "bands.csv"
        write_band_table(path, [bands, params["mu"]])
        frame = pd.read_csv(path, keep_default_na=False)
        assert list(frame.columns) == ["country", "year", "age", "quantity",
                                       "quantile", "value"]
        n_functional = 2 * 2 * 2 * 111
        n_param = 1 * 2 * 2 * 1
        assert len(frame) == n_functional + n_param
        param_rows = frame[frame["quantity"] == "mu"]
        assert set(param_rows["age"]) == {"NA"}
        assert set(frame["quantity"]) == {"ex", "mu"}
        ex_rows = frame[frame["quantity"] == "ex"]
        assert sorted(set(ex_rows["quantile"])) == [0.1, 0.9]
