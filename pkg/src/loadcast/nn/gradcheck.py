"""Finite-difference validation of analytic gradients."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, NumericError
from .autodiff import no_grad
from .params import ParamStore

STEP = 1e-5
_FLOOR = 1e-6


def grad_check(
    model_forward,
    params: ParamStore,
    probe_count: int,
    rng: np.random.Generator | None = None,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    model_forward() must rebuild the loss from the store's current values and
    return a scalar Tensor. probe_count entries are sampled uniformly across
    all parameters; each is probed with a central difference at h=1e-5 and
    compared as |analytic - fd| / max(|analytic|, |fd|, 1e-6).
    """
    if probe_count < 1:
        raise ConfigError(f"probe_count must be >= 1, got {probe_count}")
    if rng is None:
        rng = np.random.default_rng(0)

    params.zero_grads()
    loss = model_forward()
    if not np.isfinite(loss.value):
        raise NumericError("loss is non-finite at the probe point")
    loss.backward()
    analytic = {p.name: p.grad.copy() for p in params}
    params.zero_grads()

    plist = list(params)
    sizes = np.array([p.value.size for p in plist])
    total = int(sizes.sum())
    flat_indices = rng.choice(total, size=min(probe_count, total), replace=False)
    bounds = np.cumsum(sizes)

    worst = 0.0
    with no_grad():
        for flat in sorted(int(i) for i in flat_indices):
            which = int(np.searchsorted(bounds, flat, side="right"))
            param = plist[which]
            local = flat - (bounds[which] - sizes[which])
            i, j = divmod(int(local), param.value.shape[1])
            original = param.value[i, j]
            param.value[i, j] = original + STEP
            up = float(model_forward().value)
            param.value[i, j] = original - STEP
            down = float(model_forward().value)
            param.value[i, j] = original
            if not (np.isfinite(up) and np.isfinite(down)):
                raise NumericError(f"loss is non-finite while probing {param.name!r}")
            fd = (up - down) / (2.0 * STEP)
            a = float(analytic[param.name][i, j])
            rel = abs(a - fd) / max(abs(a), abs(fd), _FLOOR)
            worst = max(worst, rel)
    return worst
