"""Asymmetric Polynomial Loss for multi-label classification, in NumPy."""

from .analysis import (
    CriticalPoint,
    CurveTable,
    NoCriticalPoint,
    emit_curve,
    find_pstar,
    interaction_difference,
    negative_gradient_wrt_logit,
    positive_gradient,
)
from .losses import (
    APLParams,
    InvalidInputError,
    LossOutput,
    apl_forward_backward,
    apl_elementwise,
    apl_series_elementwise,
    apl_series_forward,
    bce,
    bce_with_logits,
    shift_probability,
    sigmoid,
    taylor_bce,
)
from .metrics import (
    MetricReport,
    UndefinedMetricError,
    mean_average_precision,
    micro_f1,
    ndcg_at_k,
    precision_at_k,
)
from .synth import Dataset, DatasetSpec, generate
from .trainer import ModelSpec, OptSpec, TrainHistory, evaluate, finite_difference_audit, train

__version__ = "0.1.0"
