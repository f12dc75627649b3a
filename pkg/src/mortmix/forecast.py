"""Posterior-predictive forecasting and life-table post-processing.

Forecasts extend each stored posterior draw's state trajectory forward
with its own drift and innovation variance, so parameter uncertainty and
innovation noise both enter the predictive bands.  Life-table
functionals are computed per draw from the discretized age-at-death
distribution and summarized afterwards by pointwise quantiles (linear
interpolation), giving equal-tailed credible bands.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
import pandas as pd

from .mixture import AgeGrid, discretize_batch, state_to_natural
from .sampler import PosteriorDraws

__all__ = [
    "ForecastConfig",
    "LifeTableFunctionals",
    "FunctionalBands",
    "forecast_states",
    "life_table",
    "life_table_batch",
    "summarize",
    "functional_bands",
    "parameter_bands",
    "write_band_table",
]

DEFAULT_QUANTILES = (0.05, 0.5, 0.95)

FUNCTIONAL_QUANTITIES = ("age_at_death", "qx", "mx", "ex")


@dataclass(frozen=True)
class ForecastConfig:
    """Forecast horizon (steps past the fit window) and summary quantiles."""

    horizon: int
    quantiles: tuple = DEFAULT_QUANTILES

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        q = tuple(float(v) for v in self.quantiles)
        if not q or any(not 0.0 < v < 1.0 for v in q):
            raise ValueError("quantiles must lie strictly inside (0, 1)")
        if any(b <= a for a, b in zip(q, q[1:])):
            raise ValueError("quantiles must be strictly increasing")
        object.__setattr__(self, "quantiles", q)


def forecast_states(draws: PosteriorDraws, cfg: ForecastConfig,
                    rng: np.random.Generator | int = 0) -> np.ndarray:
    """Simulate future states per stored draw.

    Returns (n_chains, n_stored, p, horizon, K): each draw's final state
    is pushed forward h steps with that draw's drift and innovation
    variance under the fitted innovation law.
    """
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    law = draws.config.innovation
    c, s, p, _, k = draws.theta.shape
    sd = np.sqrt(draws.eta2)
    out = np.empty((c, s, p, cfg.horizon, k))
    state = draws.theta[:, :, :, -1, :].copy()
    for h in range(cfg.horizon):
        eps = law.draw_standard(rng, (c, s, p, k))
        state = state + draws.beta + sd * eps
        out[:, :, :, h, :] = state
    return out


@dataclass(frozen=True)
class LifeTableFunctionals:
    """Life-table columns built from one age-at-death distribution.

    d: deaths per cell (the input distribution); l: survivors at exact
    age x (l_0 = 1); L: person-years lived in [x, x+1), l_x - a_x d_x;
    q: death probability d_x / l_x; m: central death rate d_x / L_x;
    e: remaining life expectancy sum_{z >= x} L_z / l_x.  Cells with
    l_x = 0 carry NaN in q, m and e.
    """

    d: np.ndarray
    l: np.ndarray
    L: np.ndarray
    q: np.ndarray
    m: np.ndarray
    e: np.ndarray
    a: np.ndarray


def life_table_batch(d, a: float | np.ndarray = 0.5) -> dict[str, np.ndarray]:
    """Vectorized life-table columns for distributions stacked on axis 0.

    d: (..., A) nonnegative, summing to 1 along the last axis.
    """
    d = np.asarray(d, dtype=np.float64)
    n = d.shape[-1]
    a_vec = np.broadcast_to(np.asarray(a, dtype=np.float64), d.shape[-1:])
    # l_x = 1 - sum_{z < x} d_z; exact complement keeps l_max = d_max
    csum = np.cumsum(d[..., :-1], axis=-1)
    l = np.concatenate([np.ones(d.shape[:-1] + (1,)), 1.0 - csum], axis=-1)
    np.maximum(l, 0.0, out=l)
    big_l = l - a_vec * d
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(l > 0.0, d / l, np.nan)
        m = np.where(l > 0.0, np.where(big_l > 0.0, d / big_l, np.inf), np.nan)
        tail = np.cumsum(big_l[..., ::-1], axis=-1)[..., ::-1]
        e = np.where(l > 0.0, tail / l, np.nan)
    return {"d": d, "l": l, "L": big_l, "q": q, "m": m, "e": e,
            "a": np.broadcast_to(a_vec, d.shape).copy()}


def life_table(d, a: float | np.ndarray = 0.5) -> LifeTableFunctionals:
    """Life table of a single age-at-death distribution (radix 1).

    With the symmetric default a = 1/2 the identity
    sum_x d_x (x + a) = e_0 holds exactly up to rounding, because
    e_0 = sum_x L_x = sum_x d_x (x + 1 - a) with L_x = l_x - a d_x.
    """
    d = np.asarray(d, dtype=np.float64)
    if d.ndim != 1:
        raise ValueError("life_table expects a single distribution; "
                         "use life_table_batch for stacks")
    if np.any(d < 0.0) or abs(d.sum() - 1.0) > 1e-8:
        raise ValueError("d must be a probability simplex over age cells")
    cols = life_table_batch(d, a)
    return LifeTableFunctionals(**cols)


def summarize(values, quantiles=DEFAULT_QUANTILES) -> np.ndarray:
    """Pointwise quantiles over the leading (draw) axis, linear interpolation."""
    q = np.asarray(quantiles, dtype=np.float64)
    if np.any(q <= 0.0) or np.any(q >= 1.0):
        raise ValueError("quantiles must lie strictly inside (0, 1)")
    return np.quantile(np.asarray(values, dtype=np.float64), q, axis=0)


@dataclass
class FunctionalBands:
    """Quantile bands of one functional on a country x year x age grid.

    values has shape (n_quantiles, p, n_years, A); years covers the fit
    window and any forecast horizon; in_sample marks which years are fit
    years.
    """

    quantity: str
    quantiles: tuple
    countries: list[str]
    years: np.ndarray
    ages: np.ndarray
    values: np.ndarray
    in_sample: np.ndarray


def _stacked_states(draws: PosteriorDraws, forecast: np.ndarray | None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """States per (draw, country, year) for fit years plus any horizon."""
    c, s, p, _, k = draws.theta.shape
    fit = draws.theta[:, :, :, 1:, :].reshape(c * s, p, -1, k)
    years = draws.years.astype(np.int64)
    in_sample = np.ones(years.size, dtype=bool)
    if forecast is not None:
        h = forecast.shape[3]
        step = int(years[1] - years[0]) if years.size > 1 else 1
        fut_years = years[-1] + step * (1 + np.arange(h, dtype=np.int64))
        states = np.concatenate([fit, forecast.reshape(c * s, p, h, k)], axis=2)
        years = np.concatenate([years, fut_years])
        in_sample = np.concatenate([in_sample, np.zeros(h, dtype=bool)])
    else:
        states = fit
    return states, years, in_sample


def functional_bands(draws: PosteriorDraws, quantity: str,
                     forecast: np.ndarray | None = None,
                     quantiles=DEFAULT_QUANTILES,
                     grid: AgeGrid | None = None,
                     a: float | np.ndarray = 0.5,
                     chunk: int = 256) -> FunctionalBands:
    """Pointwise posterior bands of a life-table functional.

    quantity: "age_at_death" (the discretized distribution itself), "qx",
    "mx" or "ex".  forecast, if given, is the array from forecast_states
    and extends the year axis past the fit window.
    """
    if quantity not in FUNCTIONAL_QUANTITIES:
        raise ValueError(f"quantity must be one of {FUNCTIONAL_QUANTITIES}, got {quantity!r}")
    grid = grid or AgeGrid()
    variant = draws.config.variant
    states, years, in_sample = _stacked_states(draws, forecast)
    n_draws, p, n_years, k = states.shape
    key = {"age_at_death": "d", "qx": "q", "mx": "m", "ex": "e"}[quantity]

    out = np.empty((n_draws, p, n_years, grid.n_cells))
    flat = states.reshape(n_draws * p * n_years, k)
    for lo in range(0, flat.shape[0], chunk * p * n_years):
        hi = min(lo + chunk * p * n_years, flat.shape[0])
        probs = discretize_batch(flat[lo:hi], variant, grid)
        if key == "d":
            out.reshape(-1, grid.n_cells)[lo:hi] = probs
        else:
            out.reshape(-1, grid.n_cells)[lo:hi] = life_table_batch(probs, a)[key]
    bands = summarize(out, quantiles)
    return FunctionalBands(quantity=quantity, quantiles=tuple(quantiles),
                           countries=list(draws.countries), years=years,
                           ages=grid.ages.copy(), values=bands, in_sample=in_sample)


_DERIVED_OLD_AGE = ("old_age_mean", "old_age_sd")


def parameter_bands(draws: PosteriorDraws, forecast: np.ndarray | None = None,
                    quantiles=DEFAULT_QUANTILES) -> dict[str, FunctionalBands]:
    """Quantile bands of the natural parameters per country and year.

    Includes the mixture weights and component parameters, and for the
    skew-normal old-age component also its derived mean and sd.  Values
    arrays have shape (n_quantiles, p, n_years, 1) with a dummy age axis
    (written as NA by write_band_table).
    """
    variant = draws.config.variant
    states, years, in_sample = _stacked_states(draws, forecast)
    n_draws, p, n_years, k = states.shape
    nat = state_to_natural(states, variant)
    if variant.old_age == "skew_normal":
        delta = nat["alpha"] / np.hypot(1.0, nat["alpha"])
        nat["old_age_mean"] = nat["xi"] + nat["omega"] * delta * np.sqrt(2.0 / np.pi)
        nat["old_age_sd"] = nat["omega"] * np.sqrt(1.0 - 2.0 * delta ** 2 / np.pi)
    out: dict[str, FunctionalBands] = {}
    for name, arr in nat.items():
        bands = summarize(arr, quantiles)[..., None]
        out[name] = FunctionalBands(quantity=name, quantiles=tuple(quantiles),
                                    countries=list(draws.countries), years=years,
                                    ages=None, values=bands, in_sample=in_sample)
    return out


def write_band_table(path, bands: Iterable[FunctionalBands]) -> None:
    """Write bands as delimited text: country, year, age, quantity, quantile, value.

    Scalar-per-year quantities (no age axis) get age = NA.
    """
    frames = []
    for b in bands:
        nq, p, n_years, n_age = b.values.shape
        ages = b.ages if b.ages is not None else np.array([-1])
        qi, ci, yi, ai = np.meshgrid(np.arange(nq), np.arange(p),
                                     np.arange(n_years), np.arange(n_age), indexing="ij")
        age_col = ages[ai.ravel()].astype(object)
        if b.ages is None:
            age_col = np.full(age_col.size, "NA", dtype=object)
        frames.append(pd.DataFrame({
            "country": np.asarray(b.countries, dtype=object)[ci.ravel()],
            "year": b.years[yi.ravel()],
            "age": age_col,
            "quantity": b.quantity,
            "quantile": np.asarray(b.quantiles)[qi.ravel()],
            "value": b.values.ravel(),
        }))
    pd.concat(frames, ignore_index=True).to_csv(path, index=False)
