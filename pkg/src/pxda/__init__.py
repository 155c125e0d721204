"""Data-augmentation MCMC with group-action moves and exact kernel certificates.

The package splits into:

- ``group_action``: groups acting on the augmentation space and the
  multiplier bookkeeping the moves rely on;
- ``models``: augmented models exposing both conditional samplers;
- ``kernels``: the two-block kernel, sandwich kernels built from y-moves,
  and the joint (x, g) chain;
- ``spectra``: discretized transition matrices with exact reversibility,
  operator norms, asymptotic variances, and ordering certificates;
- ``diagnostics``: trace containers, batch-means variance, autocovariance,
  and kernel comparison tables;
- ``cli``: the ``pxda`` command-line driver.
"""

from .errors import (
    DesignError,
    DomainError,
    NullSetError,
    QuadratureError,
    ReducibleKernelError,
    SamplerError,
)
from .group_action import (
    GroupAction,
    IdentityAction,
    MultiplicativeAction,
    QuadratureSpec,
    check_left_invariance,
    check_relative_invariance,
    j_eval,
)
from .models import (
    AugmentedModel,
    LaplaceToyModel,
    ProbitModel,
    ScaleDecay,
    truncated_normal_positive,
)
from .kernels import (
    ComposedRule,
    ExponentialRMeasure,
    GammaRootRMeasure,
    HaarRule,
    IdentityRule,
    PowerForm,
    QrRule,
    RMeasure,
    YUpdateRule,
    compose_rule,
    da_step,
    group_weight_mass,
    haar_weight_mass,
    haar_ystep,
    joint_xg_step,
    qr_ystep,
    run_joint_chain,
    run_sandwich_chain,
    sample_group_weight,
    sample_haar_weight,
    sandwich_step,
)
from .spectra import (
    DiscretizedJoint,
    DiscretizedKernel,
    GridSpec,
    OrderingCertificate,
    block_kernels,
    certify_orderings,
    detailed_balance_residual,
    discretize,
    discretize_joint,
    discretized_family,
    exact_asymptotic_variance,
    grid_convergence,
    maximal_correlation_sq,
    operator_norm,
    orbit_blocks,
    rule_matrix,
    stationary_weights,
)
from .diagnostics import (
    ComparisonTable,
    Trace,
    VarianceEstimate,
    autocovariance,
    batch_means_variance,
    compare_traces,
    lag_one_autocorrelation,
    read_trace,
    write_trace,
)

__version__ = "0.1.0"
