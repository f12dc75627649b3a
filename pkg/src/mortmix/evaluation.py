"""Rolling-window forecast evaluation and model comparison.

Windows slide a fixed fit length and horizon across a year range.  For
each window the model is refit, in-sample and out-of-sample predictions
are the pointwise posterior medians of the discretized age-at-death
distribution (and optionally of the central death rates), and accuracy
is MAE / MSE against observed frequencies over the age x year grid.
Competitor forecasts arrive as CSV files of predicted distributions and
are scored on the identical cells; the relative report shows
competitor-over-self score ratios summarized by median and quartiles, so
the model's own row is exactly 1.  Marginal likelihoods are estimated by
the harmonic mean of the data likelihood over posterior draws with a
jackknife standard error.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.special import logsumexp

from .data import DeathPanel
from .errors import DataError
from .forecast import ForecastConfig, forecast_states, functional_bands, life_table_batch
from .mixture import AgeGrid
from .sampler import PosteriorDraws, SamplerConfig, run_chain

__all__ = [
    "WindowSpec",
    "MetricReport",
    "rolling_windows",
    "score",
    "relative_report",
    "harmonic_mean_logml",
    "harmonic_mean_logml_se",
    "ingest_external_forecast",
    "evaluate_windows",
    "SELF_METHOD",
]

SELF_METHOD = "self"
METRICS = ("mae", "mse")
QUANTITIES = ("age_at_death", "death_rates")


@dataclass(frozen=True)
class WindowSpec:
    """Rolling-window geometry over a year range.

    Windows start at start_year and advance by step while the fit block
    plus the forecast horizon still fit inside [start_year, end_year].
    """

    start_year: int = 1960
    end_year: int = 2016
    fit_length: int = 20
    horizon: int = 10
    step: int = 1

    def __post_init__(self):
        if self.fit_length < 1 or self.horizon < 1 or self.step < 1:
            raise ValueError("fit_length, horizon and step must be >= 1")
        if self.end_year - self.start_year + 1 < self.fit_length + self.horizon:
            raise ValueError("year range shorter than fit_length + horizon")


def rolling_windows(spec: WindowSpec) -> list[tuple[np.ndarray, np.ndarray]]:
    """All (fit_years, test_years) pairs the window geometry generates."""
    out = []
    start = spec.start_year
    while start + spec.fit_length + spec.horizon - 1 <= spec.end_year:
        fit = start + np.arange(spec.fit_length, dtype=np.int64)
        test = fit[-1] + 1 + np.arange(spec.horizon, dtype=np.int64)
        out.append((fit, test))
        start += spec.step
    return out


def score(predicted, observed, metric: str = "mae") -> float:
    """MAE or MSE between aligned arrays, averaged over every cell."""
    p = np.asarray(predicted, dtype=np.float64)
    o = np.asarray(observed, dtype=np.float64)
    if p.shape != o.shape:
        raise ValueError(f"shape mismatch: predicted {p.shape}, observed {o.shape}")
    if metric == "mae":
        return float(np.mean(np.abs(p - o)))
    if metric == "mse":
        return float(np.mean((p - o) ** 2))
    raise ValueError(f"metric must be one of {METRICS}, got {metric!r}")


@dataclass
class MetricReport:
    """Competitor-over-self score ratios with quartile summaries.

    ratios: method -> {key -> ratio}; summary: method -> (median, q1, q3).
    Keys identify (label, country, window, ...) cells shared by self and
    every competitor.
    """

    ratios: dict
    summary: dict

    def as_frame(self) -> pd.DataFrame:
        rows = [{"method": m, "median": v[0], "q1": v[1], "q3": v[2]}
                for m, v in self.summary.items()]
        return pd.DataFrame(rows)


def relative_report(self_scores: dict, competitor_scores: dict) -> MetricReport:
    """Ratios competitor/self per key, summarized by median and quartiles.

    self_scores: key -> score.  competitor_scores: method -> {key -> score}.
    Every competitor must cover every self key; missing keys are an error
    listing what is absent.  The self method is included with all ratios
    exactly 1.
    """
    keys = sorted(self_scores)
    if not keys:
        raise ValueError("self_scores is empty")
    ratios: dict = {SELF_METHOD: {k: 1.0 for k in keys}}
    for method, scores in competitor_scores.items():
        missing = [k for k in keys if k not in scores]
        if missing:
            raise DataError(f"competitor {method!r} lacks scores for keys {missing[:5]}"
                            + ("..." if len(missing) > 5 else ""))
        ratios[method] = {k: scores[k] / self_scores[k] for k in keys}
    summary = {}
    for method, r in ratios.items():
        vals = np.array([r[k] for k in keys])
        q1, med, q3 = np.quantile(vals, [0.25, 0.5, 0.75])
        summary[method] = (float(med), float(q1), float(q3))
    return MetricReport(ratios=ratios, summary=summary)


def harmonic_mean_logml(loglik_draws) -> float:
    """Harmonic-mean estimator of the log marginal likelihood.

    log ml = -log mean(exp(-loglik)) = -(logsumexp(-ll) - log B) for B
    posterior draws of the data log-likelihood.
    """
    ll = np.asarray(loglik_draws, dtype=np.float64).ravel()
    if ll.size == 0:
        raise ValueError("needs at least one log-likelihood draw")
    return float(-(logsumexp(-ll) - np.log(ll.size)))


def harmonic_mean_logml_se(loglik_draws) -> float:
    """Delete-one jackknife standard error of harmonic_mean_logml."""
    ll = np.asarray(loglik_draws, dtype=np.float64).ravel()
    n = ll.size
    if n < 2:
        raise ValueError("jackknife needs at least two draws")
    neg = -ll
    total = logsumexp(neg)
    # log(sum excluding i) via complementary subtraction in log space
    with np.errstate(divide="ignore"):
        rel = neg - total
        log_excl = total + np.log1p(-np.minimum(np.exp(rel), 1.0 - 1e-16))
    jack = -(log_excl - np.log(n - 1))
    mean_jack = jack.mean()
    var = (n - 1) / n * ((jack - mean_jack) ** 2).sum()
    return float(np.sqrt(var))


def ingest_external_forecast(path, grid: AgeGrid | None = None) -> dict:
    """Read competitor forecasts from CSV.

    Expected columns: method, country, year, age, value, where value is
    the predicted age-at-death probability.  Each (method, country, year)
    must cover the full age grid; vectors off the simplex by at most 1e-6
    are renormalized with a warning, anything worse is an error.  Returns
    {(method, country, year): probs (A,)}.
    """
    path = Path(path)
    try:
        df = pd.read_csv(path)
    except FileNotFoundError:
        raise DataError(f"competitor file not found: {path}") from None
    needed = ["method", "country", "year", "age", "value"]
    missing = [c for c in needed if c not in df.columns]
    if missing:
        raise DataError(f"competitor csv {path} lacks columns {missing}")
    if grid is None:
        grid = AgeGrid(int(df["age"].max()))
    out: dict = {}
    for (method, country, year), g in df.groupby(["method", "country", "year"]):
        ages = g["age"].to_numpy()
        if not np.array_equal(np.sort(ages), grid.ages):
            raise DataError(f"competitor {method!r} {country!r} {year}: age grid "
                            f"incomplete or duplicated")
        probs = np.empty(grid.n_cells)
        probs[ages] = g["value"].to_numpy(dtype=np.float64)
        if np.any(probs < 0.0):
            raise DataError(f"competitor {method!r} {country!r} {year}: negative probabilities")
        gap = abs(probs.sum() - 1.0)
        if gap > 1e-6:
            raise DataError(f"competitor {method!r} {country!r} {year}: "
                            f"probabilities sum to {probs.sum():.8f}")
        if gap > 0.0:
            if gap > 1e-12:
                warnings.warn(f"competitor {method!r} {country!r} {year}: "
                              f"renormalizing simplex off by {gap:.2e}", stacklevel=2)
            probs = probs / probs.sum()
        out[(str(method), str(country), int(year))] = probs
    return out


def _observed_freqs(panel: DeathPanel, years: np.ndarray) -> np.ndarray:
    """Observed age distributions (p, len(years), A)."""
    sub = panel.subset_years(years)
    counts = sub.counts_by_cell().astype(np.float64)
    totals = counts.sum(axis=-1, keepdims=True)
    if np.any(totals == 0):
        raise DataError("cannot form observed frequencies: zero-count (country, year)")
    return counts / totals


def _median_distributions(draws: PosteriorDraws, forecast, quantity: str):
    """Posterior-median predictions (p, n_years, A) and the year flags."""
    key = "age_at_death" if quantity == "age_at_death" else "mx"
    bands = functional_bands(draws, key, forecast=forecast, quantiles=(0.5,))
    return bands.values[0], bands.years, bands.in_sample


def evaluate_windows(panels: dict, window: WindowSpec, sampler_cfg: SamplerConfig,
                     hyper=None, quantities=("age_at_death",), metrics=METRICS,
                     competitors: dict | None = None, threads: int = 1) -> tuple[pd.DataFrame, dict]:
    """Fit every rolling window of every labeled panel and score forecasts.

    panels: {label: DeathPanel} (labels distinguish e.g. sexes).  Returns
    (long results table, {(quantity, sample, metric): MetricReport}).
    Competitor forecasts only enter out-of-sample age_at_death scoring
    (they supply predicted distributions, not refits), plus death_rates
    when requested.  Each window is fit with a seed spawned from the base
    config's seed and the (label, window) position, so results do not
    depend on scheduling.
    """
    for q in quantities:
        if q not in QUANTITIES:
            raise ValueError(f"quantities must be among {QUANTITIES}, got {q!r}")
    for m in metrics:
        if m not in METRICS:
            raise ValueError(f"metrics must be among {METRICS}, got {m!r}")
    competitors = competitors or {}
    wins = rolling_windows(window)
    if not wins:
        raise ValueError("window spec generates no windows")

    jobs = []
    for li, (label, panel) in enumerate(sorted(panels.items())):
        for wi, (fit_years, test_years) in enumerate(wins):
            jobs.append((li, label, panel, wi, fit_years, test_years))

    def run_one(job):
        li, label, panel, wi, fit_years, test_years = job
        seed = np.random.SeedSequence([sampler_cfg.seed, li, wi])
        cfg = SamplerConfig.from_dict({**sampler_cfg.to_dict(),
                                       "seed": int(seed.generate_state(1)[0])})
        fit_panel = panel.subset_years(fit_years)
        draws = run_chain(fit_panel, hyper, cfg)
        fc = forecast_states(draws, ForecastConfig(horizon=window.horizon),
                             rng=np.random.default_rng(seed.spawn(1)[0]))
        rows = []
        obs_fit = _observed_freqs(panel, fit_years)
        obs_test = _observed_freqs(panel, test_years)
        for quantity in quantities:
            pred, years, in_sample = _median_distributions(draws, fc, quantity)
            if quantity == "death_rates":
                o_fit = life_table_batch(obs_fit)["m"]
                o_test = life_table_batch(obs_test)["m"]
            else:
                o_fit, o_test = obs_fit, obs_test
            p_fit = pred[:, in_sample, :]
            p_test = pred[:, ~in_sample, :]
            for ci, country in enumerate(panel.countries):
                for metric in metrics:
                    rows.append({"label": label, "window": wi,
                                 "fit_start": int(fit_years[0]), "country": country,
                                 "quantity": quantity, "sample": "in", "metric": metric,
                                 "method": SELF_METHOD,
                                 "value": score(p_fit[ci], o_fit[ci], metric)})
                    rows.append({"label": label, "window": wi,
                                 "fit_start": int(fit_years[0]), "country": country,
                                 "quantity": quantity, "sample": "out", "metric": metric,
                                 "method": SELF_METHOD,
                                 "value": score(p_test[ci], o_test[ci], metric)})
            for method, table in competitors.items():
                for ci, country in enumerate(panel.countries):
                    try:
                        comp = np.stack([table[(method, country, int(y))] for y in test_years])
                    except KeyError as exc:
                        raise DataError(f"competitor {method!r} lacks forecast for "
                                        f"{exc.args[0]}") from None
                    comp_pred = life_table_batch(comp)["m"] if quantity == "death_rates" else comp
                    for metric in metrics:
                        rows.append({"label": label, "window": wi,
                                     "fit_start": int(fit_years[0]), "country": country,
                                     "quantity": quantity, "sample": "out", "metric": metric,
                                     "method": method,
                                     "value": score(comp_pred, o_test[ci], metric)})
        ll = draws.loglik.ravel()
        rows.append({"label": label, "window": wi, "fit_start": int(fit_years[0]),
                     "country": "__all__", "quantity": "logml", "sample": "in",
                     "metric": "harmonic_mean", "method": SELF_METHOD,
                     "value": harmonic_mean_logml(ll)})
        rows.append({"label": label, "window": wi, "fit_start": int(fit_years[0]),
                     "country": "__all__", "quantity": "logml_se", "sample": "in",
                     "metric": "jackknife", "method": SELF_METHOD,
                     "value": harmonic_mean_logml_se(ll)})
        return rows

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            all_rows = [r for rows in pool.map(run_one, jobs) for r in rows]
    else:
        all_rows = [r for job in jobs for r in run_one(job)]
    table = pd.DataFrame(all_rows)

    reports: dict = {}
    methods = sorted({m for m in table["method"].unique() if m != SELF_METHOD})
    for quantity in quantities:
        for sample in ("in", "out"):
            for metric in metrics:
                mask = ((table["quantity"] == quantity) & (table["sample"] == sample)
                        & (table["metric"] == metric))
                selfs = table[mask & (table["method"] == SELF_METHOD)]
                self_scores = {(r.label, r.country, r.window): r.value
                               for r in selfs.itertuples()}
                comp_scores = {}
                for method in methods:
                    rows_m = table[mask & (table["method"] == method)]
                    got = {(r.label, r.country, r.window): r.value for r in rows_m.itertuples()}
                    if got:
                        comp_scores[method] = got
                if self_scores:
                    reports[(quantity, sample, metric)] = relative_report(self_scores, comp_scores)
    return table, reports
