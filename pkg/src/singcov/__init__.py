"""Norms, path simulation and stochastic-integral checks for Gaussian processes
with singular covariance.

The package covers fractional Brownian motion, bifractional Brownian motion,
processes with stationary increments (power and logarithmic variance kernels)
and kernel-driven processes ``X_t = int_0^t kappa(t - s) dW_s``.
"""

from .assumptions import (
    NOT_CHECKABLE,
    VERIFIED,
    VIOLATED,
    AssumptionReport,
    MembershipResult,
    check_assumptions,
    dyadic_cutoffs,
    membership_condition,
    ratio_verdict,
)
from .functions import PiecewiseFn, PlanarStepFn, indicator, parse_fn
from .integrals import (
    SMOOTH_FUNCTIONS,
    SmoothFn,
    gauss_expect,
    gauss_expect_2d,
    hermite,
    hermite_all,
    paley_wiener,
    parse_eps_ladder,
    quadratic_variation_eps,
    reg_integral,
    skorohod_estimate,
    smooth_fn,
    trace_F_eps,
)
from .models import (
    BifBm,
    CapabilityError,
    CovModel,
    FBm,
    Kappa,
    KernelModel,
    ModelError,
    QKernel,
    StatInc,
    cov,
    gamma,
    load_model,
    mu_offdiag_density,
    r_inf_density,
)
from .norms import (
    inner_H,
    inner_R,
    is_formal,
    mu_sign,
    norm_2R_sq_planar,
    norm_2R_sq_tensor,
    norm_H_sq,
    norm_R_sq,
    norm_report,
)
from .quadrature import (
    InadmissibleSingularityError,
    NonConvergenceError,
    NonFiniteError,
    QuadratureError,
    QuadResult,
    integrate_1d,
    integrate_2d_offdiag,
)
from .simulation import (
    NotPSDError,
    PathEnsemble,
    SimGrid,
    cholesky_psd,
    cov_matrix,
    sample_kernel_path,
    sample_paths,
)
from .verification import EXPERIMENTS, ExperimentReport, run_suite, suite_configs

__version__ = "0.1.0"
