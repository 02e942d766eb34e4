"""Distribution-inference attacks: Loss Test, Threshold Test, meta-classifiers, layer ranking."""

from .blackbox import (
    AttackRule,
    Direction,
    fit_threshold,
    loss_test,
    regression_to_binary,
    threshold_apply,
    threshold_fit,
)
from .layers import activation_count, layer_rank, layer_select
from .meta import (
    MetaConfig,
    MetaMode,
    MetaNet,
    conv_flatten,
    featurize_model,
    layer_representation,
    meta_output,
    meta_predict,
    meta_train,
)
from .pool import ShadowPool

__all__ = [
    "AttackRule",
    "Direction",
    "MetaConfig",
    "MetaMode",
    "MetaNet",
    "ShadowPool",
    "activation_count",
    "conv_flatten",
    "featurize_model",
    "fit_threshold",
    "layer_rank",
    "layer_representation",
    "layer_select",
    "loss_test",
    "meta_output",
    "meta_predict",
    "meta_train",
    "regression_to_binary",
    "threshold_apply",
    "threshold_fit",
]
