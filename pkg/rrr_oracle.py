"""
Offline ground truth for the linear problem: correlation statistics, the
closed-form rank-k optimum, and constraint saturation checks.
"""
from typing import Optional, Tuple

import numpy as np
from scipy import linalg

from errors import DimensionError
from models import CorrelationStats, Dataset, ModelState, OracleSolution

RANK_TOLERANCE = 1e-10


def _symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def accumulate_stats(data: Dataset) -> CorrelationStats:
    """
    Empirical second moments Cxx = XX^T/T, Cxy = XY^T/T, Cyy = YY^T/T.
    Cxx and Cyy are symmetrized to remove roundoff asymmetry.
    """
    T = data.X.shape[1]
    if T < 1:
        raise DimensionError("cannot accumulate statistics of an empty dataset")
    X, Y = data.X, data.Y
    return CorrelationStats(
        Cxx=_symmetrize(X @ X.T / T),
        Cxy=X @ Y.T / T,
        Cyy=_symmetrize(Y @ Y.T / T),
        T=T,
    )


def default_ridge(stats: CorrelationStats) -> float:
    m = stats.Cxx.shape[0]
    ridge = 1e-10 * float(np.trace(stats.Cxx)) / m
    return ridge if ridge > 0 else 1e-10


def inverse_sqrt(cxx: np.ndarray, ridge: float) -> np.ndarray:
    """(Cxx + ridge I)^(-1/2) through a symmetric eigendecomposition."""
    eigenvalues, eigenvectors = linalg.eigh(cxx + ridge * np.eye(cxx.shape[0]))
    if eigenvalues.min() <= 0:
        raise ValueError(
            f"Cxx + ridge*I is not positive definite (smallest eigenvalue {eigenvalues.min():.3e}); "
            "increase the ridge"
        )
    return (eigenvectors / np.sqrt(eigenvalues)) @ eigenvectors.T


def solve_rrr(stats: CorrelationStats, k: int, ridge: Optional[float] = None) -> OracleSolution:
    """
    Global minimum of (1/T) sum ||y - W2 W1 x||^2 over rank-k factorizations.

    With S = (Cxx + ridge I)^(-1/2) and M = S Cxy Cyx S, the optimum takes
    the rows of U as the top-k eigenvectors of M, W1 = U S and
    W2 = (W1 Cxy)^T. The first layer then satisfies W1 Cxx W1^T = I_k.

    Args:
        stats: correlation statistics
        k: hidden dimension
        ridge: Cxx regularizer; defaults to 1e-10 * Tr(Cxx) / m

    Returns:
        OracleSolution; rank_ok is False (with a warning) when Cxy has
        fewer than k non-negligible singular values
    """
    if k < 1:
        raise DimensionError(f"k must be >= 1, got {k}")
    if ridge is None:
        ridge = default_ridge(stats)
    m = stats.Cxx.shape[0]

    S = inverse_sqrt(stats.Cxx, ridge)
    F = S @ stats.Cxy
    M = _symmetrize(F @ F.T)
    eigenvalues, eigenvectors = linalg.eigh(M)
    eigenvalues = eigenvalues[::-1]
    eigenvectors = eigenvectors[:, ::-1]

    usable = min(k, m)
    U = np.zeros((k, m))
    U[:usable] = eigenvectors[:, :usable].T
    W1_opt = U @ S
    W2_opt = (W1_opt @ stats.Cxy).T

    captured = float(np.sum(np.clip(eigenvalues[:usable], 0.0, None)))
    optimal_loss = max(float(np.trace(stats.Cyy)) - captured, 0.0)

    singular_values = linalg.svdvals(stats.Cxy)
    rank_ok = (
        k <= len(singular_values)
        and singular_values[0] > 0
        and singular_values[k - 1] > RANK_TOLERANCE * singular_values[0]
    )
    if not rank_ok:
        print(f"WARNING: Cxy has fewer than k={k} non-zero singular values; "
              "the constraint need not be saturated at the returned solution")

    return OracleSolution(
        optimal_loss=optimal_loss,
        M_eigenvalues=eigenvalues,
        W1_opt=W1_opt,
        W2_opt=W2_opt,
        rank_ok=bool(rank_ok),
    )


def check_saturation(state: ModelState, stats: CorrelationStats) -> Tuple[float, float]:
    """
    Returns:
        (gap, q_min_sv): ||W1 Cxx W1^T - I_k||_F and the smallest singular value of Q
    """
    W1 = state.W1
    gap = float(np.linalg.norm(W1 @ stats.Cxx @ W1.T - np.eye(state.k)))
    q_min_sv = float(linalg.svdvals(state.Q).min())
    return gap, q_min_sv


def stats_objective(W1: np.ndarray, W2: np.ndarray, stats: CorrelationStats) -> float:
    """Linear objective from second moments: Tr Cyy - 2 Tr(W2 W1 Cxy) + Tr(W2 W1 Cxx W1^T W2^T)."""
    P = W2 @ W1
    return float(
        np.trace(stats.Cyy)
        - 2.0 * np.sum(P * stats.Cxy.T)
        + np.sum((P @ stats.Cxx) * P)
    )
