"""
Evaluation of a trained model on a dataset: the regression objective, its
constrained upper bound, constraint saturation and the teaching-signal check.

Everything here is read-only and vectorized over the dataset columns.
"""
from typing import Optional

import numpy as np
from scipy import linalg

from models import (Dataset, DiagnosticsSummary, ModelState, Nonlinearity,
                    TeachingSignalReport)
from rrr_oracle import accumulate_stats, check_saturation, default_ridge, solve_rrr

RELATIVE_ERROR_GUARD = 1e-12


def hidden_activity(state: ModelState, X: np.ndarray,
                    nonlinearity: Nonlinearity = Nonlinearity.LINEAR) -> np.ndarray:
    """k x T hidden activity; ReLU units subtract the frozen running mean."""
    U = state.W1 @ X
    if nonlinearity == Nonlinearity.LINEAR:
        return U
    z_bar = state.z_bar if state.z_bar is not None else np.zeros(state.k)
    return np.maximum(U, 0.0) - z_bar[:, None]


def predict(state: ModelState, X: np.ndarray,
            nonlinearity: Nonlinearity = Nonlinearity.LINEAR) -> np.ndarray:
    return state.W2 @ hidden_activity(state, X, nonlinearity)


def objective(state: ModelState, data: Dataset,
              nonlinearity: Nonlinearity = Nonlinearity.LINEAR) -> float:
    """(1/T) sum_t ||y_t - W2 f(W1 x_t)||^2"""
    residual = data.Y - predict(state, data.X, nonlinearity)
    return float(np.sum(residual * residual) / data.T)


def upper_bound_objective(state: ModelState, data: Dataset,
                          nonlinearity: Nonlinearity = Nonlinearity.LINEAR) -> float:
    """
    (1/T) sum_t [y^T y - 2 y^T W2 z + Tr W2 W2^T + Tr QQ^T (z z^T - I)]

    Bounds the objective from above whenever (1/T) sum z z^T <= I and the
    Q term is non-negative. Only meaningful for the linear network.
    """
    T = data.T
    Z = hidden_activity(state, data.X, nonlinearity)
    QQt = state.Q @ state.Q.T
    cz = Z @ Z.T / T
    return float(
        np.sum(data.Y * data.Y) / T
        - 2.0 * np.sum(data.Y * (state.W2 @ Z)) / T
        + np.sum(state.W2 * state.W2)
        + np.sum(QQt * (cz - np.eye(state.k)))
    )


def hidden_covariance(state: ModelState, data: Dataset,
                      nonlinearity: Nonlinearity = Nonlinearity.LINEAR) -> np.ndarray:
    Z = hidden_activity(state, data.X, nonlinearity)
    return Z @ Z.T / data.T


def constraint_gap(state: ModelState, data: Dataset,
                   nonlinearity: Nonlinearity = Nonlinearity.LINEAR) -> float:
    """||(1/T) sum z z^T - I_k||_F"""
    return float(np.linalg.norm(hidden_covariance(state, data, nonlinearity) - np.eye(state.k)))


def teaching_signal_report(state: ModelState, data: Dataset,
                           ridge: Optional[float] = None) -> TeachingSignalReport:
    """
    Compare the local teaching signal a - Qn with the backpropagated error
    W2^T (y - y_tilde), where y_tilde = Cyx Cxx^-1 x is the least-squares
    estimate of y from the same dataset's statistics.

    Args:
        state: linear model
        data: dataset the model was trained on
        ridge: Cxx regularizer; None uses the oracle default, 0 solves exactly
    """
    stats = accumulate_stats(data)
    if ridge is None:
        ridge = default_ridge(stats)
    cxx = stats.Cxx + ridge * np.eye(data.m)
    # y_tilde columns = Cyx Cxx^-1 X
    Y_tilde = linalg.solve(cxx, stats.Cxy, assume_a="pos").T @ data.X

    Z = state.W1 @ data.X
    teaching = state.W2.T @ data.Y - state.Q @ (state.Q.T @ Z)
    backprop = state.W2.T @ (data.Y - Y_tilde)

    teaching_norm = np.linalg.norm(teaching, axis=0)
    backprop_norm = np.linalg.norm(backprop, axis=0)
    rel_err = np.linalg.norm(teaching - backprop, axis=0) / (backprop_norm + RELATIVE_ERROR_GUARD)
    cosine = np.sum(teaching * backprop, axis=0) / (
        teaching_norm * backprop_norm + RELATIVE_ERROR_GUARD
    )

    return TeachingSignalReport(
        mean_rel_err=float(np.mean(rel_err)),
        cosine_mean=float(np.clip(np.mean(cosine), -1.0, 1.0)),
        samples_used=data.T,
    )


def summarize(state: ModelState, data: Dataset, ridge: Optional[float] = None) -> DiagnosticsSummary:
    """All linear diagnostics of one model on one dataset."""
    stats = accumulate_stats(data)
    current = objective(state, data)
    bound = upper_bound_objective(state, data)
    gap, q_min_sv = check_saturation(state, stats)
    oracle = solve_rrr(stats, state.k, ridge)
    return DiagnosticsSummary(
        objective=current,
        upper_bound_objective=bound,
        tightness_ratio=abs(bound - current) / current if current > 0 else 0.0,
        constraint_gap=gap,
        q_min_sv=q_min_sv,
        teaching_signal=teaching_signal_report(state, data, ridge),
        oracle_loss=oracle.optimal_loss,
    )
