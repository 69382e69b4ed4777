"""Sparse-input neural networks with quantile-threshold penalty selection."""

from .activations import (
    DEFAULT_ACTIVATION,
    RELU,
    ActivationSpec,
    act_deriv,
    act_second_deriv,
    act_value,
)
from .errors import (
    ConfigError,
    DataError,
    DegenerateParameterError,
    NumericalError,
    SparseAnnError,
)
from .network import (
    Dataset,
    NetworkShape,
    Theta,
    backward,
    forward,
    link_apply,
    loss_and_grad,
    predict,
    predict_class,
)
from .objective import (
    PenaltySpec,
    hessian_at_null,
    loss_cross_entropy,
    loss_sqrt_l2,
    objective_value,
    penalty_l1,
    prox_l1,
)
from .qut import (
    QutConfig,
    QutResult,
    compute_qut,
    lambda0,
    lambda0_classification,
    lambda0_oracle,
    lambda0_regression,
    null_gradient_supnorm,
    sample_null_classification,
    sample_null_regression,
)
from .simulate import (
    SimConfig,
    SimReport,
    exact_absdiff_network,
    exact_linear_network,
    gen_absdiff,
    gen_linear,
    metrics,
    run_sweep,
)
from .solver import (
    FitResult,
    SolverConfig,
    estimated_support,
    fit,
    init_theta,
    lambda_schedule,
)

__version__ = "0.1.0"
