"""Stable random neural fields: sampling, regularity diagnostics, Bayes."""

from .bayes import (
    CauchyIID,
    Composite,
    GaussianIID,
    LocalAverages,
    PointEvals,
    PosteriorEnsemble,
    ess,
    log_likelihood,
    posterior_convergence_study,
    posterior_expectation,
    posterior_importance,
    stable_pdf,
    tiny_grid_oracle,
)
from .diagnostics import (
    ConvergenceReport,
    ModulusReport,
    energy_bound_scan,
    energy_distance,
    energy_distance_bootstrap,
    fdd_convergence_study,
    lebesgue_point_study,
    local_avg_convergence_study,
    modulus_estimate,
    tn_convergence_study,
)
from .function_space import (
    Domain,
    FieldSample,
    MonteCarloConfig,
    QuadratureConfig,
    QuasinormEstimate,
    SobolevParams,
    ValidationReport,
    cube_quadrature_weights,
    local_average,
    lp_norm_estimate,
    lp_norm_value,
    quasinorm,
    quasinorm_distance,
    quasinorm_grid_1d,
    seminorm_estimate,
    separated_centers,
    tn_operator,
    validate_params,
)
from .network import (
    ActivationSpec,
    NetworkConfig,
    NetworkRealization,
    activation_apply,
    clipped_linear,
    evaluate,
    evaluate_grid,
    evaluate_values,
    holder_power,
    sample_network,
    tanh_activation,
    truncate_widths,
    with_width,
    write_field_csv,
)
from .rng import RngStream
from .stable import (
    StableParams,
    aggregate_stable,
    char_fn,
    empirical_char_fn,
    empirical_char_fn_imag,
    hill_tail_estimate,
    lalpha_norm,
    sample_sas,
)

__version__ = "0.1.0"
