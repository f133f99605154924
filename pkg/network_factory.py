"""
Construction helpers for two-layer models: seeded initialization, learning
rate schedules and finiteness checks.
"""
from typing import Optional, Tuple

import numpy as np

from errors import DimensionError, NumericOverflowError
from models import InitSpec, ModelState, ScheduleSpec, TrainConfig


def new_model(m: int, n: int, k: int, init: Optional[InitSpec] = None, seed: int = 0) -> ModelState:
    """
    Build a fresh model.

    W1 and W2 are drawn i.i.d. Gaussian with variance 1/fan_in (m for W1,
    k for W2), Q starts at q_scale * I so the initial multiplier QQ^T is
    positive definite. R (decoupled circuit only) is drawn independently
    with variance 1/k. z_bar starts at zero.

    Args:
        m: input dimension
        n: target dimension
        k: hidden dimension
        init: initialization options
        seed: 64-bit seed; equal seeds give bit-identical states

    Returns:
        ModelState
    """
    if min(m, n, k) < 1:
        raise DimensionError(f"dimensions must be >= 1, got m={m}, n={n}, k={k}")
    init = init or InitSpec()
    rng = np.random.default_rng(seed)

    W1 = rng.standard_normal((k, m)) / np.sqrt(m)
    W2 = rng.standard_normal((n, k)) / np.sqrt(k)
    Q = init.q_scale * np.eye(k)
    R = rng.standard_normal((k, k)) / np.sqrt(k) if init.decoupled else None

    return ModelState(W1=W1, W2=W2, Q=Q, R=R, z_bar=np.zeros(k))


def schedule_value(s: ScheduleSpec, t: int) -> float:
    """eta0 when t0 is absent, eta0 / (1 + t/t0) otherwise."""
    return s.value(t)


def rates_at(config: TrainConfig, t: int) -> Tuple[float, float, float]:
    """(eta_w1, eta_w2, eta_q) at step t."""
    return (
        schedule_value(config.eta_w1, t),
        schedule_value(config.eta_w2, t),
        schedule_value(config.eta_q, t),
    )


def check_finite(state: ModelState, step: Optional[int] = None) -> ModelState:
    """Raise NumericOverflowError naming the first matrix with NaN/Inf."""
    for name in ("W1", "W2", "Q", "R", "z_bar"):
        value = getattr(state, name)
        if value is not None and not np.all(np.isfinite(value)):
            raise NumericOverflowError(name, step)
    return state


def check_sample(state: ModelState, x: np.ndarray, y: Optional[np.ndarray] = None):
    """Validate sample lengths against the model."""
    if x.shape != (state.m,):
        raise DimensionError(f"x must have length {state.m}, got shape {x.shape}")
    if y is not None and y.shape != (state.n,):
        raise DimensionError(f"y must have length {state.n}, got shape {y.shape}")
