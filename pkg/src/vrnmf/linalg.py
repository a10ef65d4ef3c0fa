"""Dense-matrix primitives shared by every solver.

Matrices are plain 2-d float64 ``numpy.ndarray`` objects.  The validating
constructors here (:func:`as_matrix`, :func:`as_vector`) are the only entry
points that admit outside data; they reject NaN/Inf and malformed shapes so
the numerical kernels can assume clean input.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .exceptions import ContractError, DegeneracyError, DimensionError, NonFiniteError

# ~100x double eps scaled by typical dimension; overridable per call.
ORTHONORMALITY_TOL = 1e-10
SYMMETRY_TOL = 1e-8


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and convert ``a`` to a 2-d float64 array.

    Raises
    ------
    DimensionError
        If ``a`` is not 2-d or has a zero dimension.
    NonFiniteError
        If ``a`` contains NaN or infinite entries.
    """
    out = np.asarray(a, dtype=float)
    if out.ndim != 2:
        raise DimensionError(f"{name} must be 2-d, got ndim={out.ndim}")
    if out.shape[0] == 0 or out.shape[1] == 0:
        raise DimensionError(f"{name} must be non-empty, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise NonFiniteError(f"{name} contains NaN or Inf entries")
    return out


def as_vector(a, name: str = "vector") -> np.ndarray:
    """Validate and convert ``a`` to a 1-d float64 array (non-empty, finite)."""
    out = np.asarray(a, dtype=float)
    if out.ndim != 1:
        raise DimensionError(f"{name} must be 1-d, got ndim={out.ndim}")
    if out.size == 0:
        raise DimensionError(f"{name} must be non-empty")
    if not np.all(np.isfinite(out)):
        raise NonFiniteError(f"{name} contains NaN or Inf entries")
    return out


class SvdTriple(NamedTuple):
    """Thin SVD ``a = u @ diag(sigma) @ v.T`` with orthonormal u, v columns."""

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray


def svd_triple(a) -> SvdTriple:
    """Thin SVD of a dense matrix, singular values sorted non-increasing."""
    a = as_matrix(a, "a")
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    return SvdTriple(u=u, sigma=s, v=vt.T)


def project_simplex(h) -> np.ndarray:
    """Euclidean projection onto the unit simplex {v >= 0, sum(v) <= 1}.

    Sort-based O(r log r) scheme: the projection is ``[h - l]_+`` where the
    multiplier ``l`` is zero when ``[h]_+`` already sums to at most one and
    otherwise solves ``sum([h - l]_+) = 1``.

    Parameters
    ----------
    h : array_like, 1-d
        Point to project.

    Returns
    -------
    numpy.ndarray
        The unique nearest point of the simplex.
    """
    h = as_vector(h, "h")
    return project_simplex_columns(h[:, None])[:, 0]


def colsum(a: np.ndarray) -> np.ndarray:
    """Column sums accumulated row by row in a fixed order.

    numpy's axis-0 reductions may block the summation differently depending
    on the batch width; this keeps per-column results bitwise independent of
    how many columns are processed together.
    """
    out = a[0, :].astype(float, copy=True)
    for i in range(1, a.shape[0]):
        out += a[i, :]
    return out


def project_simplex_columns(v) -> np.ndarray:
    """Project every column of an r-by-n array onto {v >= 0, sum(v) <= 1}."""
    v = np.asarray(v, dtype=float)
    out = np.maximum(v, 0.0)
    over = colsum(out) > 1.0
    if np.any(over):
        out[:, over] = _project_sum_to_one(v[:, over])
    return out


def _project_sum_to_one(v: np.ndarray) -> np.ndarray:
    # Projection onto {v >= 0, sum(v) = 1}; only valid when the sum<=1
    # constraint is active, which the caller guarantees.
    r, n = v.shape
    u = -np.sort(-v, axis=0)
    css = np.cumsum(u, axis=0) - 1.0
    ranks = np.arange(1, r + 1)[:, None]
    k = np.count_nonzero(u - css / ranks > 0, axis=0)
    tau = css[k - 1, np.arange(n)] / k
    return np.maximum(v - tau, 0.0)


def svt(y, theta: float) -> np.ndarray:
    """Singular value thresholding: shrink each singular value by ``theta``.

    Returns ``u @ diag(max(sigma - theta, 0)) @ v.T`` where ``u, sigma, v``
    is the SVD of ``y``; this is the proximal operator of
    ``theta * (nuclear norm)``.
    """
    y = as_matrix(y, "y")
    if theta < 0:
        raise ContractError(f"theta must be nonnegative, got {theta}")
    if theta == 0.0:
        return y.copy()
    u, s, vt = np.linalg.svd(y, full_matrices=False)
    s = np.maximum(s - theta, 0.0)
    return (u * s) @ vt


def null_space_basis(w_minus, rank_tol: float = ORTHONORMALITY_TOL) -> np.ndarray:
    """Orthonormal basis of the null space of ``w_minus.T``.

    Parameters
    ----------
    w_minus : array_like, shape (m, k)
        Must have full column rank with k < m.
    rank_tol : float
        Relative singular-value cutoff used for the rank check.

    Returns
    -------
    numpy.ndarray, shape (m, m - k)
        Columns q satisfy ``w_minus.T @ q = 0`` and ``q.T @ q = I``.
    """
    w_minus = as_matrix(w_minus, "w_minus")
    m, k = w_minus.shape
    if k >= m:
        raise DegeneracyError(
            f"null space of a {m}x{k} matrix transposed is trivial (need k < m)"
        )
    u, s, _ = np.linalg.svd(w_minus, full_matrices=True)
    if s[-1] <= rank_tol * max(s[0], 1e-300):
        deficient = int(np.sum(s <= rank_tol * max(s[0], 1e-300)))
        raise DegeneracyError(
            f"input of shape {m}x{k} is rank deficient: {deficient} of {k} "
            f"singular values below tolerance (columns 0..{k - 1} dependent)"
        )
    return u[:, k:]


def spectral_norm_sq(
    a,
    sym_tol: float = SYMMETRY_TOL,
    rel_tol: float = 1e-9,
    max_iters: int = 10000,
    exact_max_dim: int = 32,
) -> float:
    """Largest eigenvalue of a symmetric PSD matrix.

    Equals the squared spectral norm of any factor ``b`` with ``a = b @ b.T``.
    Uses an exact symmetric eigendecomposition up to ``exact_max_dim`` and a
    deterministic power iteration beyond it.
    """
    a = as_matrix(a, "a")
    k1, k2 = a.shape
    if k1 != k2:
        raise DimensionError(f"a must be square, got {a.shape}")
    scale = np.max(np.abs(a))
    if scale == 0.0:
        return 0.0
    if np.max(np.abs(a - a.T)) > sym_tol * scale:
        raise ContractError("a is not symmetric within tolerance")
    if k1 <= exact_max_dim:
        return float(max(np.linalg.eigvalsh(a)[-1], 0.0))
    # Fixed start vector keeps the result deterministic across calls.
    v = 1.0 + np.arange(k1) / k1
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iters):
        av = a @ v
        nrm = np.linalg.norm(av)
        if nrm == 0.0:
            return 0.0
        v = av / nrm
        lam_new = float(v @ (a @ v))
        if abs(lam_new - lam) <= rel_tol * max(abs(lam_new), 1e-300):
            return max(lam_new, 0.0)
        lam = lam_new
    return max(lam, 0.0)
