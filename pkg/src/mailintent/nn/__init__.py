"""Minimal reverse-mode building blocks: parameters, layer ops, Adadelta, gradient checking."""

from mailintent.nn.params import (
    ParamTensor,
    copy_params,
    load_params,
    save_params,
    zero_grads,
)
from mailintent.nn.ops import (
    cross_entropy,
    linear_backward,
    linear_forward,
    log_softmax,
    lstm_backward,
    lstm_forward,
    pushed_cross_entropy,
    softmax,
    softmax_cross_entropy,
)
from mailintent.nn.optim import AdadeltaState, adadelta_step, sgd_step
from mailintent.nn.gradcheck import GradCheckReport, grad_check

__all__ = [
    "AdadeltaState",
    "GradCheckReport",
    "ParamTensor",
    "adadelta_step",
    "copy_params",
    "cross_entropy",
    "grad_check",
    "linear_backward",
    "linear_forward",
    "load_params",
    "log_softmax",
    "lstm_backward",
    "lstm_forward",
    "pushed_cross_entropy",
    "save_params",
    "sgd_step",
    "softmax",
    "softmax_cross_entropy",
    "zero_grads",
]
