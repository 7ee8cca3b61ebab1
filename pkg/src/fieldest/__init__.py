"""Distributed estimation of a parametric 2-D field from sensor readings
forwarded to a fusion center over analog or quantized noisy channels.

The package covers the full pipeline: field model and derivatives, sensor
deployment and SNR calibration, the two channels, maximum-likelihood /
EM / Newton-Raphson estimators, Fisher-information bounds (closed form,
truncated series, and tensor-grid quadrature), and a deterministic Monte
Carlo campaign runner with CSV/JSON reporting.
"""

from ._version import __version__
from .field import (
    N_PARAMS,
    PARAM_NAMES,
    Area,
    FieldParams,
    GaussianBellModel,
    GAUSSIAN_BELL,
    field_gradient,
    field_hessian_theta,
    field_squared_integral,
    field_value,
)
from .network import (
    SensorNetwork,
    calibrate_eta_analog,
    calibrate_eta_quantized,
    calibrate_sigma,
    deploy_uniform,
    sample_observations,
)
from .channel import (
    BitMapper,
    ObservationVector,
    Quantizer,
    ReceivedMatrix,
    amplify_forward,
    bits_of_level,
    level_probabilities,
    make_uniform_quantizer,
    quantize,
    quantize_forward,
)
from .estimators import (
    EstimateResult,
    EstimationError,
    SolverConfig,
    em_estimate,
    em_quantities,
    em_step,
    loglik_analog,
    loglik_quantized,
    newton_ml_analog,
    nr_estimate_quantized,
    q_function,
)
from .crlb import (
    CompositionGuardError,
    FisherMatrix,
    SingularFisherError,
    compositions,
    crlb_from_fisher,
    fisher_analog,
    fisher_quantized_series,
    fisher_quantized_simpson,
    gamma_quadrature,
    lambda_term,
    p_derivatives,
    series_term_count,
)
from .experiments import (
    Cell,
    ConfigError,
    ExperimentConfig,
    TrialRecord,
    box_stats,
    compare_em_nr,
    config_from_mapping,
    export_po_csv,
    export_report,
    export_trace_csv,
    initial_region_sample,
    load_config,
    load_report,
    outlier_probability,
    parse_config_text,
    resolve_cells,
    run_campaign,
    run_trial,
    squared_error,
)

__all__ = [
    "__version__",
    "N_PARAMS",
    "PARAM_NAMES",
    "Area",
    "FieldParams",
    "GaussianBellModel",
    "GAUSSIAN_BELL",
    "field_gradient",
    "field_hessian_theta",
    "field_squared_integral",
    "field_value",
    "SensorNetwork",
    "calibrate_eta_analog",
    "calibrate_eta_quantized",
    "calibrate_sigma",
    "deploy_uniform",
    "sample_observations",
    "BitMapper",
    "ObservationVector",
    "Quantizer",
    "ReceivedMatrix",
    "amplify_forward",
    "bits_of_level",
    "level_probabilities",
    "make_uniform_quantizer",
    "quantize",
    "quantize_forward",
    "EstimateResult",
    "EstimationError",
    "SolverConfig",
    "em_estimate",
    "em_quantities",
    "em_step",
    "loglik_analog",
    "loglik_quantized",
    "newton_ml_analog",
    "nr_estimate_quantized",
    "q_function",
    "CompositionGuardError",
    "FisherMatrix",
    "SingularFisherError",
    "compositions",
    "crlb_from_fisher",
    "fisher_analog",
    "fisher_quantized_series",
    "fisher_quantized_simpson",
    "gamma_quadrature",
    "lambda_term",
    "p_derivatives",
    "series_term_count",
    "Cell",
    "ConfigError",
    "ExperimentConfig",
    "TrialRecord",
    "box_stats",
    "compare_em_nr",
    "config_from_mapping",
    "export_po_csv",
    "export_report",
    "export_trace_csv",
    "initial_region_sample",
    "load_config",
    "load_report",
    "outlier_probability",
    "parse_config_text",
    "resolve_cells",
    "run_campaign",
    "run_trial",
    "squared_error",
]
