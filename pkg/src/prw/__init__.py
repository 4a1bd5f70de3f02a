"""Projection robust Wasserstein distances and minimum-distance estimators."""

from .distances import (
    MaxSwConfig,
    PrwResult,
    RsganConfig,
    compute_v_pi,
    iprw,
    max_sw_pushforward,
    max_sw_quantile_mc,
    prw2_rsgan,
)
from .exact_ot import (
    TransportPlan,
    cost_matrix,
    interp_cdf,
    interp_quantile,
    sinkhorn,
    solve_exact_ot,
    wasserstein_1d,
    wasserstein_p,
)
from .exceptions import DegenerateStepError, InfeasibleMarginalsError, InvalidInputError
from .harness import ExperimentConfig, ResultTable, __version__, fit_rate, run_experiment
from .mde import (
    AdamState,
    EcsLocationParams,
    FitConfig,
    GaussianParams,
    adam_step,
    fit_meprw_ecs,
    fit_meprw_gaussian,
    fit_mprw_gaussian,
    grad_f1,
    grad_f2,
    grad_f3,
)
from .measures import (
    DiscreteMeasure,
    EcsSpec,
    MixtureSpec,
    make_empirical,
    sample_ecs,
    sample_gaussian_mixture,
    sample_hypercube,
    sample_positive_stable,
)
from .stiefel import qr_retract, sample_uniform_stiefel, tangent_project
