"""
Per-sample update rules for the two-layer network.

All rules compute every intermediate from the pre-update weights and then
commit the new weights together; the input state is never mutated.
"""
from typing import Optional, Sequence, Tuple

import numpy as np

from errors import MissingWeightsError, NumericOverflowError
from models import (CorrelationStats, ModelState, Nonlinearity, Sample,
                    StepIntermediates, TrainConfig, Variant)
from network_factory import check_sample

Rates = Sequence[float]


def _hidden(state: ModelState, x: np.ndarray, nonlinearity: Nonlinearity):
    """
    Returns (u, f_u, z, gate): pre-activation, activation before mean
    subtraction, hidden activity and the W1 plasticity gate (None = all rows).
    """
    u = state.W1 @ x
    if nonlinearity == Nonlinearity.LINEAR:
        return u, u, u, None
    relu = np.maximum(u, 0.0)
    z_bar = state.z_bar if state.z_bar is not None else np.zeros_like(u)
    return u, relu, relu - z_bar, u > 0


def forward(state: ModelState, x: np.ndarray, nonlinearity: Nonlinearity = Nonlinearity.LINEAR):
    """
    Network output for one input.

    Returns:
        (z, y_hat) with z the hidden activity and y_hat = W2 z
    """
    x = np.asarray(x, dtype=np.float64)
    check_sample(state, x)
    _, _, z, _ = _hidden(state, x, nonlinearity)
    return z, state.W2 @ z


def _gated_w1(W1: np.ndarray, eta: float, delta: np.ndarray, x: np.ndarray, gate) -> np.ndarray:
    if gate is None:
        return W1 + eta * np.outer(delta, x)
    # Inactive rows keep their exact bits
    W1_new = W1.copy()
    W1_new[gate] += eta * np.outer(delta[gate], x)
    return W1_new


def _updated_z_bar(state: ModelState, f_u: np.ndarray, nonlinearity: Nonlinearity, mean_rate: float):
    if nonlinearity != Nonlinearity.RELU:
        return state.z_bar
    z_bar = state.z_bar if state.z_bar is not None else np.zeros_like(f_u)
    return z_bar + mean_rate * (f_u - z_bar)


def _commit(state: ModelState, step: Optional[int], **updates) -> ModelState:
    for name, value in updates.items():
        if value is not None and not np.all(np.isfinite(value)):
            raise NumericOverflowError(name, step)
    return state.model_copy(update=updates)


def bmvr_step(state: ModelState, s: Sample, rates: Rates, tau: float = 1.0,
              nonlinearity: Nonlinearity = Nonlinearity.LINEAR, mean_rate: float = 1e-4,
              step: Optional[int] = None) -> Tuple[ModelState, StepIntermediates]:
    """
    One stochastic gradient descent-ascent step:

        W1  <- W1 + eta1 * G (a - Q n) x^T
        W2^T <- W2^T + eta2 (z y^T - W2^T)
        Q   <- Q + (eta_q / tau)(z n^T - Q)

    with z = f(W1 x), a = W2^T y, n = Q^T z and G the ReLU gate (all ones
    for the linear network).
    """
    eta1, eta2, eta_q = rates
    x, y = s.x, s.y
    check_sample(state, x, y)

    _, f_u, z, gate = _hidden(state, x, nonlinearity)
    a = state.W2.T @ y
    n_vec = state.Q.T @ z
    teaching = a - state.Q @ n_vec

    W1 = _gated_w1(state.W1, eta1, teaching, x, gate)
    W2 = state.W2 + eta2 * (np.outer(y, z) - state.W2)
    Q = state.Q + (eta_q / tau) * (np.outer(z, n_vec) - state.Q)
    z_bar = _updated_z_bar(state, f_u, nonlinearity, mean_rate)

    new_state = _commit(state, step, W1=W1, W2=W2, Q=Q, z_bar=z_bar)
    return new_state, StepIntermediates(z=z, a=a, n_vec=n_vec, teaching=teaching)


def backprop_step(state: ModelState, s: Sample, rates: Rates,
                  nonlinearity: Nonlinearity = Nonlinearity.LINEAR, mean_rate: float = 1e-4,
                  step: Optional[int] = None) -> Tuple[ModelState, StepIntermediates]:
    """
    Gradient step on the half squared error 0.5 * ||y - W2 f(W1 x)||^2:

        W1 <- W1 + eta1 * G (W2^T eps) x^T
        W2 <- W2 + eta2 * eps z^T,     eps = y - W2 z

    Q is left untouched. Only the first two rates are used.
    """
    eta1, eta2 = rates[0], rates[1]
    x, y = s.x, s.y
    check_sample(state, x, y)

    _, f_u, z, gate = _hidden(state, x, nonlinearity)
    y_hat = state.W2 @ z
    epsilon = y - y_hat
    backprop_error = state.W2.T @ epsilon

    W1 = _gated_w1(state.W1, eta1, backprop_error, x, gate)
    W2 = state.W2 + eta2 * np.outer(epsilon, z)
    z_bar = _updated_z_bar(state, f_u, nonlinearity, mean_rate)

    a = state.W2.T @ y
    n_vec = state.Q.T @ z
    intermediates = StepIntermediates(
        z=z, a=a, n_vec=n_vec, teaching=a - state.Q @ n_vec, y_hat=y_hat, epsilon=epsilon
    )
    return _commit(state, step, W1=W1, W2=W2, z_bar=z_bar), intermediates


def bmvr_decoupled_step(state: ModelState, s: Sample, rates: Rates, tau: float = 1.0,
                        nonlinearity: Nonlinearity = Nonlinearity.LINEAR, mean_rate: float = 1e-4,
                        step: Optional[int] = None) -> Tuple[ModelState, StepIntermediates]:
    """
    BMVR with independent pyramidal-to-interneuron weights R (n = R z).
    Both Q and R follow Hebbian rules with rate eta_q / tau, so Q^T - R
    shrinks by exactly (1 - eta_q/tau) per step.
    """
    if state.R is None:
        raise MissingWeightsError("decoupled step requires R; build the model with InitSpec(decoupled=True)")
    eta1, eta2, eta_q = rates
    x, y = s.x, s.y
    check_sample(state, x, y)

    _, f_u, z, gate = _hidden(state, x, nonlinearity)
    a = state.W2.T @ y
    n_vec = state.R @ z
    teaching = a - state.Q @ n_vec
    rate = eta_q / tau

    W1 = _gated_w1(state.W1, eta1, teaching, x, gate)
    W2 = state.W2 + eta2 * (np.outer(y, z) - state.W2)
    Q = state.Q + rate * (np.outer(z, n_vec) - state.Q)
    R = state.R + rate * (np.outer(n_vec, z) - state.R)
    z_bar = _updated_z_bar(state, f_u, nonlinearity, mean_rate)

    new_state = _commit(state, step, W1=W1, W2=W2, Q=Q, R=R, z_bar=z_bar)
    return new_state, StepIntermediates(z=z, a=a, n_vec=n_vec, teaching=teaching)


def offline_bmvr_step(state: ModelState, stats: CorrelationStats, rates: Rates, tau: float = 1.0,
                      step: Optional[int] = None) -> ModelState:
    """
    Full-batch descent-ascent on the constrained objective (linear network):

        W1  <- W1 + eta1 (W2^T Cyx - Q Q^T W1 Cxx)
        W2^T <- W2^T + eta2 (W1 Cxy - W2^T)
        Q   <- Q + (eta_q / tau)(W1 Cxx W1^T - I) Q

    This is the dataset average of bmvr_step.
    """
    eta1, eta2, eta_q = rates
    W1, W2, Q = state.W1, state.W2, state.Q
    W1_cxx = W1 @ stats.Cxx
    QQt = Q @ Q.T

    W1_new = W1 + eta1 * (W2.T @ stats.Cyx - QQt @ W1_cxx)
    W2_new = W2 + eta2 * ((W1 @ stats.Cxy).T - W2)
    Q_new = Q + (eta_q / tau) * ((W1_cxx @ W1.T - np.eye(state.k)) @ Q)
    return _commit(state, step, W1=W1_new, W2=W2_new, Q=Q_new)


def apply_step(state: ModelState, sample: Sample, config: TrainConfig, rates: Rates,
               step: Optional[int] = None) -> ModelState:
    """Dispatch one online step for the configured variant."""
    if config.variant == Variant.BMVR:
        new_state, _ = bmvr_step(state, sample, rates, config.tau, config.nonlinearity,
                                 config.mean_rate, step)
    elif config.variant == Variant.BACKPROP:
        new_state, _ = backprop_step(state, sample, rates, config.nonlinearity,
                                     config.mean_rate, step)
    elif config.variant == Variant.BMVR_DECOUPLED:
        new_state, _ = bmvr_decoupled_step(state, sample, rates, config.tau, config.nonlinearity,
                                           config.mean_rate, step)
    else:
        raise ValueError(f"variant {config.variant.value} is not an online rule")
    return new_state
