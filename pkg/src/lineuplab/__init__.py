"""Player and generalized-lineup ratings from plus-minus stint data."""

from .errors import InputError, LineupLabError, NumericalError
from .lapm import LapmConfig, MalaSchedule, lapm, lapm_map, mala_sample, spectral_basis
from .metrics import MetricResult, RankedTable, apm, hapm, papm, rank_within_size, raw_pm
from .model import (
    AggregatedRecord,
    GeneralizedLineup,
    StintRecord,
    build_design,
    build_line_graph,
    enumerate_generalized,
)
from .pipeline import FitConfig, combine_league, fit_season, fit_team
from .regression import CVConfig, fit_ridge, ridge
from .uncertainty import bootstrap_hapm, posterior_ranks

__version__ = "0.1.0"

__all__ = [
    "AggregatedRecord", "CVConfig", "FitConfig", "GeneralizedLineup", "InputError",
    "LapmConfig", "LineupLabError", "MalaSchedule", "MetricResult", "NumericalError",
    "RankedTable", "StintRecord", "apm", "bootstrap_hapm", "build_design", "build_line_graph",
    "combine_league", "enumerate_generalized", "fit_ridge", "fit_season", "fit_team", "hapm",
    "lapm", "lapm_map", "mala_sample", "papm", "posterior_ranks", "rank_within_size", "raw_pm",
    "ridge", "spectral_basis",
]
