"""Configuration-space metric and compactness diagnostics.

The distance between two configurations of equal cardinality is the optimal
matching distance min over pairings of sqrt(sum |x_i - y_sigma(i)|^2),
capped at 1; configurations of different cardinality are at distance 1.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy.optimize import linear_sum_assignment

from .configuration import Configuration


def _as_config(c) -> Configuration:
    if isinstance(c, Configuration):
        return c
    raise TypeError("expected a Configuration")


def optimal_assignment(zeta: Configuration, eta: Configuration) -> tuple[np.ndarray, np.ndarray]:
    """Minimum-cost pairing of two equal-cardinality configurations.

    Costs are squared Euclidean distances, solved exactly in O(n^3).
    Returns (row indices, matched column indices).
    """
    if zeta.dimension != eta.dimension:
        raise ValueError("configurations must share a dimension")
    if len(zeta) != len(eta):
        raise ValueError("optimal assignment needs equal cardinalities")
    if len(zeta) == 0:
        return np.empty(0, dtype=int), np.empty(0, dtype=int)
    diff = zeta.positions[:, None, :] - eta.positions[None, :, :]
    cost = np.sum(diff * diff, axis=2)
    return linear_sum_assignment(cost)


def euclidean_matching_distance(zeta: Configuration, eta: Configuration) -> float:
    """sqrt of the minimal total squared displacement over all pairings."""
    rows, cols = optimal_assignment(zeta, eta)
    if rows.size == 0:
        return 0.0
    total = 0.0
    for i, j in zip(rows.tolist(), cols.tolist()):
        d = zeta.positions[i] - eta.positions[j]
        total += float(np.dot(d, d))
    return math.sqrt(total)


def dist(zeta: Configuration, eta: Configuration) -> float:
    """Metric on finite configurations: 1 ^ matching distance, 1 across cardinalities."""
    zeta = _as_config(zeta)
    eta = _as_config(eta)
    if zeta.dimension != eta.dimension:
        raise ValueError("configurations must share a dimension")
    if len(zeta) != len(eta):
        return 1.0
    return min(1.0, euclidean_matching_distance(zeta, eta))


def min_pair_separation(gamma: Configuration, radius: float) -> float:
    """Minimum pairwise distance among points of gamma inside the closed
    ball of the given radius around the origin; +inf with fewer than two
    points inside."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    if len(gamma) < 2:
        return math.inf
    norms = np.linalg.norm(gamma.positions, axis=1)
    inside = gamma.positions[norms <= radius]
    m = inside.shape[0]
    if m < 2:
        return math.inf
    diff = inside[:, None, :] - inside[None, :, :]
    d2 = np.sum(diff * diff, axis=2)
    iu = np.triu_indices(m, k=1)
    return float(np.sqrt(np.min(d2[iu])))


def compactness_statistic(gamma: Configuration, n: int) -> float:
    """Point count in B_n(0) plus the reciprocal minimum pair separation
    there (0 when no pair exists)."""
    if n <= 0:
        raise ValueError("n must be a positive integer")
    count = gamma.count_in_ball(float(n))
    sep = min_pair_separation(gamma, float(n)) if count >= 2 else math.inf
    inv = 0.0 if math.isinf(sep) else 1.0 / sep
    return count + inv


def default_weight(x: np.ndarray) -> float:
    return math.exp(-float(np.linalg.norm(x)))


def psi_functional(
    gamma: Configuration, weight: Callable[[np.ndarray], float] = default_weight
) -> float:
    """Sum over ordered pairs x != y of w(x) w(y) (|x-y|+1)/|x-y|.

    The weight must be positive, radial and vanishing at infinity; small
    values certify membership in a compact set of configurations.
    """
    n = len(gamma)
    if n <= 1:
        return 0.0
    w = np.array([weight(gamma.positions[i]) for i in range(n)])
    diff = gamma.positions[:, None, :] - gamma.positions[None, :, :]
    d = np.sqrt(np.sum(diff * diff, axis=2))
    total = 0.0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            total += w[i] * w[j] * (d[i, j] + 1.0) / d[i, j]
    return float(total)


def brute_force_matching_distance(zeta: Configuration, eta: Configuration) -> float:
    """Exhaustive-permutation matching distance; test oracle for n <= 7."""
    from itertools import permutations

    if len(zeta) != len(eta):
        raise ValueError("equal cardinalities required")
    n = len(zeta)
    if n == 0:
        return 0.0
    if n > 7:
        raise ValueError("brute-force oracle is limited to n <= 7")
    best = math.inf
    for perm in permutations(range(n)):
        total = 0.0
        for i in range(n):
            d = zeta.positions[i] - eta.positions[perm[i]]
            total += float(np.dot(d, d))
        if total < best:
            best = total
    return math.sqrt(best)
