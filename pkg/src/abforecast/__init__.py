"""Forecasting user engagement in A/B tests with stable beta-scaled process priors."""

from .calibrate import FitConfig, FittedParams, fit_curve, fit_mml
from .dataio import (
    ActivityPanel,
    FirstTriggerSeries,
    SufficientStats,
    parse_aggregate_csv,
    parse_long_csv,
    read_table,
    stats_from_panel,
    stats_from_series,
)
from .forecast import (
    expected_unseen,
    forecast_report,
    total_triggers_estimate,
    unseen_interval,
    unseen_users_law,
)
from .horizon import HorizonConfig, point_estimate_dm, posterior_interval_dm, sample_dm
from .marglik import log_marginal
from .posterior import HyperParams, PosteriorState, build_posterior, posterior_from_counts

__version__ = "0.1.0"
