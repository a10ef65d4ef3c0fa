"""Abundance update: least squares over the unit simplex, one problem per pixel.

Each column of H solves ``min 0.5 ||x_j - W h||^2`` over the simplex
{h >= 0, sum(h) <= 1} by accelerated projected gradient with a fixed 1/L
step and function-value adaptive restart.  Because the column problems are
independent they are batched: one call advances all still-unconverged
columns with shared r-by-r products.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ContractError, DimensionError
from .linalg import as_matrix, as_vector, colsum, project_simplex_columns, spectral_norm_sq

SIMPLEX_FEAS_TOL = 1e-12


@dataclass(frozen=True)
class ApgOptions:
    """Iteration budget and tolerances for the accelerated projected gradient loop."""

    max_iters: int = 300
    rel_tol: float = 1e-8
    restart: bool = True

    def __post_init__(self):
        if self.max_iters < 1:
            raise ContractError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.rel_tol <= 0:
            raise ContractError(f"rel_tol must be positive, got {self.rel_tol}")


def _check_in_simplex(h0: np.ndarray, name: str) -> None:
    if np.min(h0) < -SIMPLEX_FEAS_TOL or np.max(h0.sum(axis=0)) > 1.0 + SIMPLEX_FEAS_TOL:
        raise ContractError(f"{name} must have every column in the unit simplex")


def _mm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # Fixed-order matrix product accumulated over a's columns: unlike BLAS
    # (and einsum) its per-column results do not depend on the batch width,
    # so batched and per-column solves produce bitwise-identical iterates.
    out = a[:, 0:1] * b[0:1, :]
    for j in range(1, a.shape[1]):
        out += a[:, j:j + 1] * b[j:j + 1, :]
    return out


def _col_objectives(gram: np.ndarray, b: np.ndarray, h: np.ndarray) -> np.ndarray:
    # 0.5 h'Gh - b'h per column (the fit objective up to a constant).
    return 0.5 * colsum(h * _mm(gram, h)) - colsum(b * h)


def _apg_simplex_columns(
    gram: np.ndarray, b: np.ndarray, h0: np.ndarray, opts: ApgOptions
) -> np.ndarray:
    """Minimize 0.5 h'Gh - b'h over the simplex, columnwise.

    Nesterov momentum with the standard t-sequence; the momentum weight is
    dropped (t reset to 1) for any column whose extrapolated step increased
    its objective, re-doing that step as plain projected gradient.  Converged
    columns are frozen so late iterations only touch the active set.
    """
    lip = spectral_norm_sq(gram)
    if lip <= 0.0:
        raise ContractError("gram matrix is zero; no valid step size (rank(W) = r required)")

    h = h0.copy()
    y = h0.copy()
    t = np.ones(h0.shape[1])
    q = _col_objectives(gram, b, h)
    active = np.arange(h0.shape[1])

    for _ in range(opts.max_iters):
        ya = y[:, active]
        ba = b[:, active]
        h_prev = h[:, active]
        grad = _mm(gram, ya) - ba
        h_new = project_simplex_columns(ya - grad / lip)
        q_new = _col_objectives(gram, ba, h_new)

        if opts.restart:
            worse = q_new > q[active]
            if np.any(worse):
                idx = active[worse]
                grad_p = _mm(gram, h[:, idx]) - b[:, idx]
                h_pg = project_simplex_columns(h[:, idx] - grad_p / lip)
                h_new[:, worse] = h_pg
                q_new[worse] = _col_objectives(gram, b[:, idx], h_pg)
                t[idx] = 1.0

        t_cur = t[active]
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_cur * t_cur))
        beta = (t_cur - 1.0) / t_next
        y[:, active] = h_new + beta * (h_new - h_prev)
        t[active] = t_next

        diff = h_new - h_prev
        step = np.sqrt(colsum(diff * diff))
        h[:, active] = h_new
        q[active] = q_new
        still = step > opts.rel_tol * np.maximum(np.sqrt(colsum(h_new * h_new)), 1.0)
        active = active[still]
        if active.size == 0:
            break
    return h


def solve_h_column(w, x_col, h0, opts: ApgOptions | None = None) -> np.ndarray:
    """Solve one simplex-constrained least squares column.

    Parameters
    ----------
    w : array_like, shape (m, r)
        Basis, assumed full column rank.
    x_col : array_like, shape (m,)
        Data column.
    h0 : array_like, shape (r,)
        Feasible start (inside the unit simplex).
    opts : ApgOptions, optional

    Returns
    -------
    numpy.ndarray, shape (r,)
        Approximate minimizer, always inside the simplex.
    """
    opts = opts or ApgOptions()
    w = as_matrix(w, "w")
    x_col = as_vector(x_col, "x_col")
    h0 = as_vector(h0, "h0")
    if x_col.size != w.shape[0] or h0.size != w.shape[1]:
        raise DimensionError(
            f"shapes do not conform: w {w.shape}, x_col {x_col.shape}, h0 {h0.shape}"
        )
    _check_in_simplex(h0[:, None], "h0")
    gram = w.T @ w
    b = _mm(w.T, x_col[:, None])
    return _apg_simplex_columns(gram, b, h0[:, None].copy(), opts)[:, 0]


def solve_h(w, x, h0, opts: ApgOptions | None = None) -> np.ndarray:
    """Solve all n abundance columns against a fixed basis.

    W'W and W'X are formed once and shared; the result is identical to
    applying :func:`solve_h_column` to each column independently.
    """
    opts = opts or ApgOptions()
    w = as_matrix(w, "w")
    x = as_matrix(x, "x")
    h0 = as_matrix(h0, "h0")
    m, r = w.shape
    if x.shape[0] != m or h0.shape != (r, x.shape[1]):
        raise DimensionError(
            f"shapes do not conform: w {w.shape}, x {x.shape}, h0 {h0.shape}"
        )
    _check_in_simplex(h0, "h0")
    gram = w.T @ w
    b = _mm(w.T, x)
    return _apg_simplex_columns(gram, b, h0.copy(), opts)
