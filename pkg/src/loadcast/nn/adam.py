"""Adam optimizer operating in place on a ParamStore."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, NumericError
from .params import ParamStore

BETA1 = 0.9
BETA2 = 0.999
EPSILON = 1e-8


def adam_update(params: ParamStore, learning_rate: float, step: int) -> None:
    """One bias-corrected Adam step over every parameter; zeroes gradients after.

    `step` is the 1-based update count used for bias correction. Moment
    buffers live on the parameters themselves, so a store carries its own
    optimizer state across calls.
    """
    if step < 1:
        raise ConfigError(f"Adam step must be >= 1, got {step}")
    if learning_rate <= 0:
        raise ConfigError(f"learning rate must be positive, got {learning_rate}")
    correction1 = 1.0 - BETA1**step
    correction2 = 1.0 - BETA2**step
    for param in params:
        grad = param.grad
        if not np.all(np.isfinite(grad)):
            raise NumericError(f"non-finite gradient in parameter {param.name!r}")
        param.m[...] = BETA1 * param.m + (1.0 - BETA1) * grad
        param.v[...] = BETA2 * param.v + (1.0 - BETA2) * grad * grad
        m_hat = param.m / correction1
        v_hat = param.v / correction2
        param.value[...] -= learning_rate * m_hat / (np.sqrt(v_hat) + EPSILON)
        param.grad[...] = 0.0
