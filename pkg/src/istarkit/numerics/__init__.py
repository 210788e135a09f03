"""Minimal differentiable-computation layer: tensors, a recording tape with
analytic reverse-mode gradients, and an independent finite-difference oracle.
"""

from .gradcheck import (GradCheckResult, check_scenario, finite_difference_grad,
                        max_relative_error)
from .params import (AttentionParams, GRUParams, glorot, load_params,
                     named_tensors, replace_tensors, save_params, sgd)
from .record import ComputationRecord, GradientMap, backward
from .tensor import Tensor, ones, tensor, zeros

__all__ = [
    "AttentionParams",
    "ComputationRecord",
    "GRUParams",
    "GradCheckResult",
    "GradientMap",
    "Tensor",
    "backward",
    "check_scenario",
    "finite_difference_grad",
    "glorot",
    "load_params",
    "max_relative_error",
    "named_tensors",
    "ones",
    "replace_tensors",
    "save_params",
    "sgd",
    "tensor",
    "zeros",
]
