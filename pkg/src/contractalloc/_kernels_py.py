"""Pure-NumPy implementations of the allocation inner-loop kernels.

Same call signatures as the compiled twin in _kernels_cy.pyx; the backend
is picked once in contractalloc.kernels. All arrays are float64, C order.
"""

from __future__ import annotations

import numpy as np

COINCIDENT_DIST = 1e-9


def nearest_assignment(points: np.ndarray, sites: np.ndarray) -> np.ndarray:
    """Index of the squared-distance-nearest site per point, ties to the
    lowest site index."""
    if sites.shape[0] == 0:
        raise ValueError("need at least one site")
    diff = points[:, None, :] - sites[None, :, :]
    d2 = diff[..., 0] ** 2 + diff[..., 1] ** 2
    return np.argmin(d2, axis=1).astype(np.int64)


def assigned_energy(points: np.ndarray, weights: np.ndarray,
                    sites: np.ndarray, assign: np.ndarray) -> float:
    """Weighted quadratic deployment energy sum_i w_i |q_i - x_{a(i)}|^2."""
    if points.shape[0] == 0:
        return 0.0
    diff = points - sites[assign]
    return float(np.sum(weights * (diff[:, 0] ** 2 + diff[:, 1] ** 2)))


def attraction_controls(sites: np.ndarray, points: np.ndarray, weights: np.ndarray,
                        assign: np.ndarray, alpha: float) -> np.ndarray:
    """Negative energy gradient per site: -alpha * sum 2 w_i (x_j - q_i)
    over the points assigned to site j. Sites with no points get zero."""
    n = sites.shape[0]
    u = np.zeros((n, 2))
    if points.shape[0] == 0:
        return u
    contrib = weights[:, None] * (sites[assign] - points)
    u[:, 0] = np.bincount(assign, weights=contrib[:, 0], minlength=n)
    u[:, 1] = np.bincount(assign, weights=contrib[:, 1], minlength=n)
    return -2.0 * alpha * u


def barrier_controls(positions: np.ndarray, beta: float,
                     r_safe: float) -> tuple[np.ndarray, int]:
    """Repulsive log-barrier control for every robot against every other.

    Robot j is pushed by beta (x_j - x_l) / |x_j - x_l|^2 for each neighbor
    strictly inside r_safe. Coincident pairs (distance below 1e-9) would be
    singular, so they instead contribute a deterministic unit push along the
    x axis, signed by index order so the pair separates; those events are
    counted and returned.
    """
    n = positions.shape[0]
    u = np.zeros((n, 2))
    if n < 2:
        return u, 0
    diff = positions[:, None, :] - positions[None, :, :]
    d2 = diff[..., 0] ** 2 + diff[..., 1] ** 2
    np.fill_diagonal(d2, np.inf)
    coincident = d2 < COINCIDENT_DIST ** 2
    inside = (d2 < r_safe * r_safe) & ~coincident
    scale = np.where(inside, beta / np.where(inside, d2, 1.0), 0.0)
    u[:, 0] = np.sum(scale * diff[..., 0], axis=1)
    u[:, 1] = np.sum(scale * diff[..., 1], axis=1)
    degeneracies = 0
    if coincident.any():
        js, ls = np.nonzero(coincident)
        for j, l in zip(js, ls):
            u[j, 0] += 1.0 if j > l else -1.0
        degeneracies = int(len(js) // 2)
    return u, degeneracies
