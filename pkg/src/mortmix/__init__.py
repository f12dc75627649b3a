"""Dynamic skew-normal mixture modelling of age-at-death distributions.

A death-count panel (countries x years x ages) is modelled per cell as a
multinomial draw from a discretized three-part mixture: an infant mass
at age zero, a Gaussian adulthood component and a skew-normal old-age
component.  The mixture's unconstrained parameters follow country-level
random walks with drift, fit by an adaptive Metropolis-within-Gibbs
sampler; forecasts push the walks forward per posterior draw, and
life-table functionals (death probabilities, rates, expectancies) come
with pointwise credible bands.
"""

__version__ = "0.1.0"

from .errors import ConfigError, DataError, NumericalError
from .special import (SkewNormalParams, gaussian_cdf, gaussian_logcdf,
                      gaussian_pdf, owen_t, skew_normal_cdf,
                      skew_normal_moments, skew_normal_pdf)
from .mixture import (AgeGrid, LatentState, MixtureParams, ModelVariant,
                      discretize, discretize_batch, from_unconstrained,
                      mixture_cdf, multinomial_loglik, natural_to_state,
                      state_to_natural, to_unconstrained)
from .dynamics import (CountryDynamics, Hyperparams, InnovationLaw,
                       gibbs_update_beta, gibbs_update_eta2,
                       gibbs_update_theta0, log_state_prior)
from .sampler import (AdaptiveProposal, Block, BlockContext, PosteriorDraws,
                      SamplerConfig, effective_sample_size, initialize_states,
                      log_joint, metropolis_log_ratio, run_chain)
from .data import (DeathPanel, SyntheticSpec, generate_synthetic, load_draws,
                   load_panel, round_counts_preserving_totals, save_draws,
                   save_panel)
from .forecast import (ForecastConfig, FunctionalBands, LifeTableFunctionals,
                       forecast_states, functional_bands, life_table,
                       life_table_batch, parameter_bands, summarize,
                       write_band_table)
from .evaluation import (MetricReport, WindowSpec, evaluate_windows,
                         harmonic_mean_logml, harmonic_mean_logml_se,
                         ingest_external_forecast, relative_report,
                         rolling_windows, score)

__all__ = [
    "__version__",
    "ConfigError", "DataError", "NumericalError",
    "SkewNormalParams", "gaussian_pdf", "gaussian_cdf", "gaussian_logcdf",
    "owen_t", "skew_normal_pdf", "skew_normal_cdf", "skew_normal_moments",
    "AgeGrid", "ModelVariant", "MixtureParams", "LatentState",
    "state_to_natural", "natural_to_state", "to_unconstrained",
    "from_unconstrained", "mixture_cdf", "discretize", "discretize_batch",
    "multinomial_loglik",
    "Hyperparams", "CountryDynamics", "InnovationLaw", "log_state_prior",
    "gibbs_update_beta", "gibbs_update_eta2", "gibbs_update_theta0",
    "SamplerConfig", "AdaptiveProposal", "Block", "BlockContext",
    "PosteriorDraws", "run_chain", "metropolis_log_ratio",
    "initialize_states", "effective_sample_size", "log_joint",
    "DeathPanel", "SyntheticSpec", "load_panel", "save_panel",
    "generate_synthetic", "save_draws", "load_draws",
    "round_counts_preserving_totals",
    "ForecastConfig", "LifeTableFunctionals", "FunctionalBands",
    "forecast_states", "life_table", "life_table_batch", "summarize",
    "functional_bands", "parameter_bands", "write_band_table",
    "WindowSpec", "MetricReport", "rolling_windows", "score",
    "relative_report", "harmonic_mean_logml", "harmonic_mean_logml_se",
    "ingest_external_forecast", "evaluate_windows",
]
