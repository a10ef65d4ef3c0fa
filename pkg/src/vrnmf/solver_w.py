"""Basis updates for the three volume penalties.

* det:      block coordinate descent over the columns of W, each column a
            nonnegative quadratic program solved by accelerated projected
            gradient with an exact step size;
* logdet:   majorization-minimization -- minimize a tight convex upper bound
            anchored at the incoming W, again by APG with adaptive restart;
* nuclear:  proximal gradient with singular value thresholding followed by a
            nonnegative projection.

All updates consume precomputed ``H H'`` and ``X H'`` so several inner steps
can reuse them.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .exceptions import ContractError, DegeneracyError, DimensionError
from .linalg import as_matrix, null_space_basis, spectral_norm_sq, svt
from .regularizers import Regularizer, VolumeKind


@dataclass(frozen=True)
class WUpdateContext:
    """Precomputed terms shared by every inner step of one W update.

    ``hht`` is H H' (r-by-r, symmetric PSD) and ``xht`` is X H' (m-by-r).
    """

    hht: np.ndarray
    xht: np.ndarray
    lam: float
    reg: Regularizer
    inner_iters: int = 50
    rel_tol: float = 1e-9

    def __post_init__(self):
        hht = as_matrix(self.hht, "hht")
        xht = as_matrix(self.xht, "xht")
        r = hht.shape[0]
        if hht.shape != (r, r):
            raise DimensionError(f"hht must be square, got {hht.shape}")
        if xht.shape[1] != r:
            raise DimensionError(f"xht must have {r} columns, got {xht.shape}")
        scale = max(float(np.max(np.abs(hht))), 1e-300)
        if float(np.max(np.abs(hht - hht.T))) > 1e-8 * scale:
            raise ContractError("hht must be symmetric")
        if self.lam < 0:
            raise ContractError(f"lam must be nonnegative, got {self.lam}")
        if self.inner_iters < 1:
            raise ContractError(f"inner_iters must be >= 1, got {self.inner_iters}")


@dataclass(frozen=True)
class MajorizerWeights:
    """Inverse shifted Gram matrix of the anchor point, D = (Y'Y + delta I)^-1."""

    d: np.ndarray


def logdet_majorizer(w_anchor, delta: float) -> MajorizerWeights:
    """Weights of the convex upper bound on log det(W'W + delta I).

    Returns ``D = (Y'Y + delta I)^-1`` for the anchor ``Y``, computed by a
    Cholesky solve; delta > 0 guarantees positive definiteness.
    """
    w_anchor = as_matrix(w_anchor, "w_anchor")
    if delta <= 0:
        raise ContractError(f"delta must be positive, got {delta}")
    r = w_anchor.shape[1]
    gram = w_anchor.T @ w_anchor + delta * np.eye(r)
    d = cho_solve(cho_factor(gram, lower=True), np.eye(r))
    d = 0.5 * (d + d.T)
    return MajorizerWeights(d=d)


def logdet_surrogate(w, w_anchor, delta: float) -> float:
    """Value of the anchored upper bound on log det(W'W + delta I).

    Equals the true log-determinant at ``w = w_anchor`` and is never below
    it elsewhere (first-order expansion of a concave function).
    """
    w = as_matrix(w, "w")
    w_anchor = as_matrix(w_anchor, "w_anchor")
    r = w.shape[1]
    gram_anchor = w_anchor.T @ w_anchor + delta * np.eye(r)
    chol = np.linalg.cholesky(gram_anchor)
    logdet_anchor = 2.0 * float(np.sum(np.log(np.diag(chol))))
    d = cho_solve(cho_factor(gram_anchor, lower=True), np.eye(r))
    gram_w = w.T @ w
    gram_y = w_anchor.T @ w_anchor
    return logdet_anchor + float(np.sum(d * (gram_w - gram_y)))


def _apg_nonneg_column(h2: float, rho: float, q_basis, c: np.ndarray,
                       w0: np.ndarray, inner_iters: int, rel_tol: float) -> np.ndarray:
    """Minimize 0.5 w'(h2 I + rho QQ')w - c'w over w >= 0.

    ``q_basis=None`` stands for Q = I (the r = 1 case).  The step size
    1/(h2 + rho) is exact because QQ' is an orthogonal projector.
    """
    lip = h2 + rho

    def quad(w):
        if q_basis is None:
            aw = (h2 + rho) * w
        else:
            aw = h2 * w + rho * (q_basis @ (q_basis.T @ w))
        return aw, 0.5 * float(w @ aw) - float(c @ w)

    w = w0.copy()
    y = w.copy()
    t = 1.0
    _, q_val = quad(w)
    for _ in range(inner_iters):
        ay, _ = quad(y)
        w_new = np.maximum(y - (ay - c) / lip, 0.0)
        _, q_new = quad(w_new)
        if q_new > q_val:
            aw, _ = quad(w)
            w_new = np.maximum(w - (aw - c) / lip, 0.0)
            _, q_new = quad(w_new)
            t = 1.0
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        beta = (t - 1.0) / t_next
        y = w_new + beta * (w_new - w)
        step = np.linalg.norm(w_new - w)
        w = w_new
        q_val = q_new
        t = t_next
        if step <= rel_tol * max(np.linalg.norm(w), 1.0):
            break
    return w


def update_w_det(w, ctx: WUpdateContext) -> np.ndarray:
    """One full column sweep of the determinant-penalized basis update.

    For each column i the remaining columns are held fixed; the determinant
    contribution reduces to ``gamma_i * w_i' Q_i Q_i' w_i`` with ``gamma_i``
    the Gram determinant of the other columns and ``Q_i`` the orthonormal
    null-space basis of their span.  Columns whose H row is entirely zero
    are skipped with a warning (that endmember is unused by every pixel).
    """
    if ctx.reg.kind != VolumeKind.DET:
        raise ContractError(f"context regularizer must be det, got {ctx.reg.kind.value}")
    w = as_matrix(w, "w").copy()
    m, r = w.shape
    if ctx.xht.shape[0] != m or ctx.hht.shape[0] != r:
        raise DimensionError(
            f"shapes do not conform: w {w.shape}, hht {ctx.hht.shape}, xht {ctx.xht.shape}"
        )
    for i in range(r):
        h2 = float(ctx.hht[i, i])
        if h2 <= 0.0:
            warnings.warn(
                f"row {i} of H is zero; leaving column {i} of W unchanged",
                RuntimeWarning,
                stacklevel=2,
            )
            continue
        if r == 1:
            gamma = 1.0
            q_basis = None
            c = ctx.xht[:, 0].copy()
        else:
            w_minus = np.delete(w, i, axis=1)
            gram_minus = w_minus.T @ w_minus
            try:
                chol = np.linalg.cholesky(gram_minus)
            except np.linalg.LinAlgError as exc:
                raise DegeneracyError(
                    f"columns other than {i} are rank deficient"
                ) from exc
            gamma = float(np.prod(np.diag(chol)) ** 2)
            q_basis = null_space_basis(w_minus)
            c = ctx.xht[:, i] - w_minus @ np.delete(ctx.hht[:, i], i)
        w[:, i] = _apg_nonneg_column(
            h2, ctx.lam * gamma, q_basis, c, w[:, i], ctx.inner_iters, ctx.rel_tol,
        )
    return w


def update_w_logdet(w, ctx: WUpdateContext, weights: MajorizerWeights) -> np.ndarray:
    """Minimize the anchored convex surrogate over W >= 0 by APG.

    The surrogate gradient is ``W (HH' + lam D) - XH'`` with exact Lipschitz
    constant ``||HH' + lam D||_2``; adaptive restart keeps the surrogate
    non-increasing, and anchoring the weights at the incoming W makes the
    true log-det objective non-increasing as well.
    """
    if ctx.reg.kind != VolumeKind.LOGDET:
        raise ContractError(f"context regularizer must be logdet, got {ctx.reg.kind.value}")
    w = as_matrix(w, "w")
    if ctx.xht.shape != w.shape:
        raise DimensionError(f"xht shape {ctx.xht.shape} does not match w {w.shape}")
    quad_mat = ctx.hht + ctx.lam * weights.d
    lip = spectral_norm_sq(quad_mat)
    if lip <= 0.0:
        raise ContractError("surrogate curvature is zero; no valid step size")

    def phi(z):
        return 0.5 * float(np.sum((z @ quad_mat) * z)) - float(np.sum(ctx.xht * z))

    cur = w.copy()
    y = w.copy()
    t = 1.0
    phi_cur = phi(cur)
    for _ in range(ctx.inner_iters):
        grad = y @ quad_mat - ctx.xht
        w_new = np.maximum(y - grad / lip, 0.0)
        phi_new = phi(w_new)
        if phi_new > phi_cur:
            grad = cur @ quad_mat - ctx.xht
            w_new = np.maximum(cur - grad / lip, 0.0)
            phi_new = phi(w_new)
            t = 1.0
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        beta = (t - 1.0) / t_next
        y = w_new + beta * (w_new - cur)
        step = np.linalg.norm(w_new - cur)
        cur = w_new
        phi_cur = phi_new
        t = t_next
        if step <= ctx.rel_tol * max(np.linalg.norm(cur), 1.0):
            break
    return cur


def update_w_nuclear(w, ctx: WUpdateContext) -> np.ndarray:
    """Proximal gradient steps for the nuclear-norm penalty.

    Each step descends the fit term with step 1/||HH'||_2, applies singular
    value thresholding at ``step * lam``, then projects onto the nonnegative
    orthant.  The final projection breaks the plain proximal-gradient descent
    guarantee, so no per-step monotonicity is promised here.
    """
    if ctx.reg.kind != VolumeKind.NUCLEAR:
        raise ContractError(f"context regularizer must be nuclear, got {ctx.reg.kind.value}")
    w = as_matrix(w, "w")
    if ctx.xht.shape != w.shape:
        raise DimensionError(f"xht shape {ctx.xht.shape} does not match w {w.shape}")
    lip = spectral_norm_sq(ctx.hht)
    if lip <= 0.0:
        raise ContractError("hht is zero; no valid step size")
    alpha = 1.0 / lip
    cur = w.copy()
    for _ in range(ctx.inner_iters):
        descent = cur - alpha * (cur @ ctx.hht - ctx.xht)
        w_new = np.maximum(svt(descent, alpha * ctx.lam), 0.0)
        step = np.linalg.norm(w_new - cur)
        cur = w_new
        if step <= ctx.rel_tol * max(np.linalg.norm(cur), 1.0):
            break
    return cur
