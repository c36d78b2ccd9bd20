"""Variance-maximizing adaptive step sizes, baselines, and experiments.

The core idea: instead of averaging squared gradients with a fixed
coefficient, pick the per-coordinate coefficient at every step that
maximizes the implied variance estimate of the gradient. Surprising
gradients then shorten the averaging window (fast adaptation), quiet
stretches lengthen it (stability). ``madam`` and ``lamadam`` build this
into Adam-style and LaProp-style updates; fixed-coefficient baselines
and seeded experiment drivers round out the package.
"""

from .harness import (
    AggregateRecord,
    ExperimentSpec,
    RunRecord,
    lr_sweep,
    run_experiment,
    run_single,
    substream,
)
from .maxva import (
    BetaBounds,
    MaxVAState,
    bias_corrected,
    clip_beta,
    compute_beta_raw,
    maxva_step_beta,
    update_moments,
)
from .optimizers import (
    ALGORITHMS,
    LRSchedule,
    NumericError,
    OptimizerConfig,
    OptimizerState,
    StepReport,
    init_state,
    lr_at,
    step,
)
from .problems import FiniteSampleProblem, NQMProblem, nqm_grad, nqm_risk
from .toyml import (
    BlobDataset,
    MLPShape,
    ToyProblem,
    logistic_loss_grad,
    make_blobs,
    minibatch_iter,
    mlp_loss_grad,
    train,
)
from .vecmath import CoordVector, DimensionError, as_vector, ewise_map2, mean_abs, norm_l1, norm_sq

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS",
    "AggregateRecord",
    "BetaBounds",
    "BlobDataset",
    "CoordVector",
    "DimensionError",
    "ExperimentSpec",
    "FiniteSampleProblem",
    "LRSchedule",
    "MLPShape",
    "MaxVAState",
    "NQMProblem",
    "NumericError",
    "OptimizerConfig",
    "OptimizerState",
    "RunRecord",
    "StepReport",
    "ToyProblem",
    "as_vector",
    "bias_corrected",
    "clip_beta",
    "compute_beta_raw",
    "ewise_map2",
    "init_state",
    "logistic_loss_grad",
    "lr_at",
    "lr_sweep",
    "make_blobs",
    "maxva_step_beta",
    "mean_abs",
    "minibatch_iter",
    "mlp_loss_grad",
    "nqm_grad",
    "nqm_risk",
    "norm_l1",
    "norm_sq",
    "run_experiment",
    "run_single",
    "step",
    "substream",
    "train",
    "update_moments",
]
