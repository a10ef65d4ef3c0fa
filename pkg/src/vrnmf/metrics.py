"""Recovery metrics: mean-removed spectral angles, matched scoring,
recovery curves, and hard segmentation maps."""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .exceptions import ContractError, DimensionError
from .linalg import as_matrix, as_vector


def mrsa_pair(x, y) -> float:
    """Mean-removed spectral angle between two vectors, scaled to [0, 100].

    Both vectors are centered before the angle is taken, so the score ignores
    shifts and positive scalings; 0 means identical shape, 100 antipodal.
    The angle is evaluated as ``2 atan2(||u - v||, ||u + v||)`` on the unit
    directions, which gives the same value as the arccos of the normalized
    inner product but stays exact at both ends (identical inputs score 0.0,
    antipodal ones 100.0, with no cancellation error).

    Raises
    ------
    ContractError
        If either vector is constant (the angle is undefined).
    """
    x = as_vector(x, "x")
    y = as_vector(y, "y")
    if x.size != y.size:
        raise DimensionError(f"length mismatch: {x.size} vs {y.size}")
    xc = x - x.mean()
    yc = y - y.mean()
    nx = np.linalg.norm(xc)
    ny = np.linalg.norm(yc)
    if nx == 0.0 or ny == 0.0:
        raise ContractError("angle undefined for a constant vector")
    u = xc / nx
    v = yc / ny
    theta = 2.0 * float(np.arctan2(np.linalg.norm(u - v), np.linalg.norm(u + v)))
    return 100.0 * (theta / np.pi)


def mrsa_cost_matrix(w, w_true) -> np.ndarray:
    """All pairwise angles: entry (i, j) scores column i of w against column j of w_true."""
    w = as_matrix(w, "w")
    w_true = as_matrix(w_true, "w_true")
    if w.shape != w_true.shape:
        raise DimensionError(f"shape mismatch: {w.shape} vs {w_true.shape}")
    r = w.shape[1]
    cost = np.empty((r, r))
    for i in range(r):
        for j in range(r):
            try:
                cost[i, j] = mrsa_pair(w[:, i], w_true[:, j])
            except ContractError as exc:
                raise ContractError(f"column {i} or {j} is constant: {exc}") from exc
    return cost


def mrsa_matched(w, w_true) -> tuple[float, list[int]]:
    """Mean angle under the best one-to-one column matching.

    Solver output columns come in arbitrary order, so the columns of ``w``
    are assigned to the columns of ``w_true`` by minimum-cost bipartite
    matching before averaging.

    Returns
    -------
    (float, list[int])
        The mean matched angle and the permutation ``perm`` with ``perm[i]``
        the w_true column assigned to column i of w.
    """
    cost = mrsa_cost_matrix(w, w_true)
    rows, cols = linear_sum_assignment(cost)
    perm = cols[np.argsort(rows)]
    score = float(cost[rows, cols].mean())
    return score, [int(j) for j in perm]


def matched_pair_scores(w, w_true) -> list[float]:
    """Per-column angles under the optimal matching (same order as w's columns)."""
    cost = mrsa_cost_matrix(w, w_true)
    rows, cols = linear_sum_assignment(cost)
    perm = cols[np.argsort(rows)]
    return [float(cost[i, perm[i]]) for i in range(cost.shape[0])]


def recovery_curve(scores, thresholds) -> list[tuple[float, float]]:
    """Fraction of scores strictly below each threshold.

    ``thresholds`` must be sorted ascending; the resulting fractions are
    monotone non-decreasing and lie in [0, 1].
    """
    scores = as_vector(scores, "scores")
    thresholds = as_vector(thresholds, "thresholds")
    if np.any(np.diff(thresholds) < 0):
        raise ContractError("thresholds must be sorted ascending")
    n = scores.size
    return [(float(t), float(np.count_nonzero(scores < t)) / n) for t in thresholds]


def segmentation_map(h, width: int, height: int) -> np.ndarray:
    """Label each pixel with its dominant abundance component.

    Columns of ``h`` map to pixels in row-major order; labels are 1-indexed
    and ties break to the lowest component index.
    """
    h = as_matrix(h, "h")
    if width < 1 or height < 1:
        raise DimensionError("width and height must be positive")
    if h.shape[1] != width * height:
        raise DimensionError(
            f"h has {h.shape[1]} columns but the grid needs {width * height}"
        )
    labels = np.argmax(h, axis=0) + 1
    return labels.reshape(height, width)
