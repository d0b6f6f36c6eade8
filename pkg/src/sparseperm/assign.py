"""Pairwise cost matrix, exact linear assignment and permutation log-weights."""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import Dataset, LikelihoodFamily, RegressionState


def build_cost_matrix(data: Dataset, state: RegressionState, alpha: float, family: LikelihoodFamily) -> np.ndarray:
    """Tempered cost ``L[i, j]`` of explaining response ``i`` with covariate row ``j``.

    Columns index raw rows of ``X``, so the minimising assignment is directly
    the new permutation.
    """
    fitted = data.X @ state.beta
    resid = data.y[:, None] - fitted[None, :]
    L = alpha * family.cost(resid, state.sigma2)
    if not np.all(np.isfinite(L)):
        raise ValueError("cost matrix has non-finite entries")
    return L


def solve_assignment(L) -> np.ndarray:
    """Permutation ``sigma`` minimising ``sum_i L[i, sigma[i]]`` (exact)."""
    L = np.asarray(L, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise ValueError(f"cost matrix must be square, got shape {L.shape}")
    if not np.all(np.isfinite(L)):
        raise ValueError("cost matrix has non-finite entries")
    rows, cols = linear_sum_assignment(L)
    sigma = np.empty(L.shape[0], dtype=np.int64)
    sigma[rows] = cols
    return sigma


def solve_assignment_bounded(L, k_bound: int | None, max_bisect: int = 60) -> np.ndarray:
    """Assignment restricted to permutations displacing at most ``k_bound`` indices.

    Solves ``min sum_i L[i, sigma[i]] + lam * displaced(sigma)`` and bisects on
    the penalty ``lam >= 0`` for the smallest value whose solution is feasible.
    This is the Lagrangian relaxation of the constraint: the result is always
    feasible and is the exact constrained optimum whenever the relaxation has
    no duality gap (in particular when the unconstrained optimum is feasible).
    The bisection result is then polished by feasible pairwise swaps, which
    closes most of the remaining gaps on small problems.
    """
    L = np.asarray(L, dtype=float)
    sigma = solve_assignment(L)
    n = L.shape[0]
    if k_bound is None or np.count_nonzero(sigma != np.arange(n)) <= k_bound:
        return sigma
    if k_bound <= 1:
        return np.arange(n, dtype=np.int64)
    off = 1.0 - np.eye(n)
    lo = 0.0
    # any lam above the spread of L makes the identity optimal
    hi = float(L.max() - L.min()) * 2.0 + 1.0
    best = np.arange(n, dtype=np.int64)
    for _ in range(max_bisect):
        lam = 0.5 * (lo + hi)
        cand = solve_assignment(L + lam * off)
        if np.count_nonzero(cand != np.arange(n)) <= k_bound:
            hi, best = lam, cand
        else:
            lo = lam
        if hi - lo <= 1e-12 * max(1.0, hi):
            break
    return improve_by_swaps(L, best, k_bound)


def improve_by_swaps(L, sigma, k_bound: int | None, max_passes: int = 100) -> np.ndarray:
    """Greedy best-improvement transpositions that keep ``displaced <= k_bound``."""
    L = np.asarray(L, dtype=float)
    sigma = np.array(sigma, dtype=np.int64)
    n = sigma.size
    rows = np.arange(n)
    for _ in range(max_passes):
        cur = L[rows, sigma]
        # gain[i, j] of giving row i column sigma[j] and row j column sigma[i]
        swapped = L[:, sigma]
        delta = swapped + swapped.T - cur[:, None] - cur[None, :]
        moved = sigma != rows
        new_i = sigma[None, :] != rows[:, None]
        disp_change = new_i.astype(int) + new_i.T.astype(int) - moved[:, None] - moved[None, :]
        feasible = np.ones_like(delta, dtype=bool)
        if k_bound is not None:
            feasible = moved.sum() + disp_change <= k_bound
        delta = np.where(feasible, delta, np.inf)
        np.fill_diagonal(delta, np.inf)
        i, j = np.unravel_index(np.argmin(delta), delta.shape)
        if not delta[i, j] < -1e-12 * max(1.0, abs(cur.sum())):
            break
        sigma[i], sigma[j] = sigma[j], sigma[i]
    return sigma


def assignment_objective(L, sigma) -> float:
    L = np.asarray(L)
    return float(L[np.arange(L.shape[0]), np.asarray(sigma)].sum())


def log_weights(L) -> np.ndarray:
    """Log of the weight matrix ``exp(-L)``; a permutation's log-weight is ``sum_i W[i, sigma[i]]``."""
    L = np.asarray(L, dtype=float)
    if not np.all(np.isfinite(L)):
        raise ValueError("cost matrix has non-finite entries")
    return -L
