"""Spectral oracles and estimators for the dimension of high-dimensional state-space series."""

from .errors import ConvergenceError, DegenerateError
from .noise_equivalents import (
    NoiseModel,
    SpectralMeasure,
    SupportAutocov,
    SupportCca,
    autocov_support,
    cca_density,
    cca_stieltjes,
    cca_stieltjes_tilde,
    cca_support,
    density_autocov,
    f_ratio,
    phi_autocov,
    solve_t_autocov,
    support_edge_autocov,
    w_of_x,
)

from .state_space import (
    ExampleModel,
    SignalStats,
    StateSpaceModel,
    cca_fig_model,
    example_model_odd_s,
    example_model_s2,
    mc_model,
    simulate,
    table_model,
    theoretical_stats,
)
from .spike_oracle import (
    SpikeReport,
    autocov_outliers,
    autocov_spike_count,
    cca_F_matrix,
    cca_outliers,
    H_matrix,
    snr_threshold_cca,
)
from .hankel_stats import (
    EmpiricalSpectrum,
    HankelPair,
    autocov_sample_spectrum,
    build_hankel_pair,
    cca_sample_spectrum,
    estimate_s_ratio,
    estimate_s_threshold,
)
from .experiment_runner import ExperimentConfig, TrialRecord, oracle_vs_empirical, run_figure, run_table, trial_seed

__version__ = "0.1.0"
