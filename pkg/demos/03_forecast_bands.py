"""Posterior-predictive forecasting from a saved fit.

Loads the draw store written by 02_fit_synthetic.py (run that first),
pushes every posterior draw ten years past the fit window, and builds
credible bands for life expectancy at birth and for the age-at-death
distribution itself.  Writes a fan chart to demos/output/ and a tidy
band table in CSV form.  Runs in well under a minute.
"""

from __future__ import annotations

import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from mortmix import (ForecastConfig, forecast_states, functional_bands,
                     load_draws, parameter_bands, write_band_table)

OUT = Path(__file__).parent / "output"
store = OUT / "synthetic_fit"
if not store.exists():
    sys.exit("run demos/02_fit_synthetic.py first; no draw store found")

draws = load_draws(store)
print(f"loaded {draws.n_chains} chain(s) x {draws.n_stored} draws, "
      f"years {draws.years[0]}..{draws.years[-1]}")

# ---------------------------------------------------------------------------
# simulate forward: each draw carries its own drift and innovation noise
# ---------------------------------------------------------------------------

fc = forecast_states(draws, ForecastConfig(horizon=10),
                     rng=np.random.default_rng(2))
print(f"forecast states: {fc.shape} (chains, draws, countries, horizon, coords)")

# ---------------------------------------------------------------------------
# life expectancy at birth, fit window plus horizon
# ---------------------------------------------------------------------------

bands = functional_bands(draws, "ex", forecast=fc,
                         quantiles=(0.05, 0.25, 0.5, 0.75, 0.95))
e0 = bands.values[:, :, :, 0]            # (quantiles, countries, years)
years = bands.years

fig, ax = plt.subplots(figsize=(9, 5))
colors = ("#1f78b4", "#33a02c")
for j, country in enumerate(draws.countries):
    ax.fill_between(years, e0[0, j], e0[4, j], alpha=0.18, color=colors[j])
    ax.fill_between(years, e0[1, j], e0[3, j], alpha=0.30, color=colors[j])
    ax.plot(years, e0[2, j], color=colors[j], lw=1.6, label=country)
split = years[bands.in_sample][-1] + 0.5
ax.axvline(split, color="gray", ls=":", lw=1)
ax.text(split + 0.2, ax.get_ylim()[0] + 0.1, "forecast", color="gray",
        fontsize=9)
ax.set_xlabel("year")
ax.set_ylabel("life expectancy at birth")
ax.set_title("posterior bands (50% and 90%) with a 10-year forecast")
ax.legend(frameon=False)
fig.tight_layout()
fig.savefig(OUT / "e0_fan_chart.png", dpi=120)

med_now = e0[2, 0, bands.in_sample][-1]
med_end = e0[2, 0, -1]
print(f"country {draws.countries[0]}: median e0 {med_now:.2f} at the end of "
      f"the fit window, {med_end:.2f} ten years out")

# ---------------------------------------------------------------------------
# full band table: distribution cells plus natural-parameter paths
# ---------------------------------------------------------------------------

dist = functional_bands(draws, "age_at_death", forecast=fc)
params = parameter_bands(draws, forecast=fc)
write_band_table(OUT / "forecast_bands.csv",
                 [bands, dist, params["xi"], params["old_age_mean"]])
print(f"fan chart and band table written to {OUT}")
