"""Iterative Bayesian fusion of heterogeneous degradation data for
remaining-useful-life prognostics."""

from ._kernels import backend_name
from .errors import (
    ConditioningError,
    ConfigurationError,
    DegenerateSampleError,
    DegfusionError,
    DomainError,
    ExhaustedVariablesError,
    NumericalOverflowError,
    QuadratureError,
    ShapeError,
)
from .fusion import (
    FusionProblem,
    interpolate_to_group,
    log_posterior,
    log_posterior_direct,
    log_posterior_marginalized,
    noise_marginalization_deviation,
)
from .hsic import HsicReport, gram_matrix, hsic_v_statistic, r2_hsic, rank_and_select
from .mcmc import Chain, ConvergenceReport, gelman_rubin, posterior_sample, run_chains, rwmh_chain
from .models import (
    DataGroup,
    DesignOfExperiments,
    ParisInputs,
    ParisModel,
    PiecewiseResetModel,
    TimeGrid,
    Trajectory,
    build_doe,
    evaluate_model_batch,
    generate_data_groups,
    paris_trajectory,
    piecewise_reset_trajectory,
)
from .pipeline import (
    FinalReport,
    IterationRecord,
    PipelineSettings,
    PipelineState,
    RulDistribution,
    rul_cdf,
    run_full_pipeline,
    run_iteration,
    segmented_assimilation,
)
from .probability import (
    Marginal,
    PriorSpec,
    SimplexWeights,
    kde_density,
    kl_vs_uniform,
    sample_dirichlet,
    sample_prior,
    silverman_bandwidth,
)
from .surrogate import (
    GpSurrogate,
    KleBasis,
    SurrogateEnsemble,
    build_ensemble,
    ensemble_predict,
    fit_gp,
    gp_predict,
    kle_decompose,
    load_ensemble,
    project_modes,
    q2_score,
    save_ensemble,
)

__version__ = "0.1.0"
