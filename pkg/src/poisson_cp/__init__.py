"""Shifted-Poisson CP maximum likelihood, Fisher-information trace machinery,
and a Fano minimax lower-bound toolkit, with a Monte Carlo experiment harness."""

from .estimator import (
    FitOptions,
    FitResult,
    align_components,
    equalize_l1,
    equalize_l2,
    factor_mse,
    fit_rank_r,
)
from .experiments import (
    ExperimentConfig,
    ExperimentRecord,
    aggregate,
    gap_statistics,
    run_experiment,
    run_rank_one_experiment,
    run_rank_r_experiment,
)
from .fim import (
    FimResult,
    RankPolicy,
    TraceBounds,
    fim_jacobian,
    fim_rank_one_closed_form,
    pinv_trace,
    psd_order_check,
    surrogate_trace_closed_form,
    trace_bounds,
)
from .likelihood import (
    ShiftedLoss,
    factor_gradient,
    hessian_diagonal,
    score_tensor,
    shifted_loglik,
)
from .minimax import (
    PackingSet,
    build_packing_set,
    choose_epsilon,
    minimax_lower_bound,
    poisson_kl,
    vg_binary_code,
)
from .sampling import GenConfig, gen_rank_one_model, gen_rank_r_model, sample_poisson_tensor
from .tensor_core import (
    CpModel,
    DenseTensor,
    cp_reconstruct,
    flatten_theta,
    frobenius_norm,
    from_vectors,
    gram_schmidt_coefficients,
    inner_product,
    mttkrp,
    unflatten_theta,
)

__version__ = "0.1.0"
