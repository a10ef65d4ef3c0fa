"""Volume regularizers on the basis matrix and the full regularized objective.

Three penalties on W are supported, all non-decreasing functions of its
singular values:

* ``det``      -- half the determinant of the Gram matrix W'W,
* ``logdet``   -- half the log-determinant of W'W + delta*I,
* ``nuclear``  -- the sum of the singular values of W.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .exceptions import ContractError, DimensionError
from .linalg import as_matrix


class VolumeKind(str, enum.Enum):
    """Which volume penalty to apply to W."""

    DET = "det"
    LOGDET = "logdet"
    NUCLEAR = "nuclear"


@dataclass(frozen=True)
class Regularizer:
    """A volume penalty choice plus its parameters.

    ``delta`` is used only by ``logdet``; ``None`` means "resolve at solver
    setup" from the initial basis (see :func:`resolve_delta`).
    """

    kind: VolumeKind = VolumeKind.LOGDET
    delta: float | None = None

    def __post_init__(self):
        if self.kind == VolumeKind.LOGDET and self.delta is not None and self.delta <= 0:
            raise ContractError(f"logdet delta must be positive, got {self.delta}")

    @property
    def concrete_delta(self) -> float:
        if self.kind != VolumeKind.LOGDET:
            raise ContractError(f"delta is undefined for kind={self.kind.value}")
        if self.delta is None:
            raise ContractError("delta has not been resolved; call resolve_delta first")
        return self.delta


def resolve_delta(reg: Regularizer, w0: np.ndarray) -> Regularizer:
    """Fill in the logdet floor when left unset.

    Default is ``1e-8 * trace(w0' w0) / r``, a relative regularization of the
    Gram spectrum that stays meaningful across data scales.
    """
    if reg.kind != VolumeKind.LOGDET or reg.delta is not None:
        return reg
    w0 = as_matrix(w0, "w0")
    r = w0.shape[1]
    delta = 1e-8 * float(np.sum(w0 * w0)) / r
    if delta <= 0.0:
        delta = 1e-12
    return Regularizer(kind=reg.kind, delta=delta)


@dataclass(frozen=True)
class ObjectiveValue:
    """One evaluation of the regularized least-squares objective."""

    fit: float
    volume: float
    lam: float
    total: float


def _gram_logdet(gram: np.ndarray) -> float:
    # log det of an SPD matrix via Cholesky; raises LinAlgError if not SPD.
    chol = np.linalg.cholesky(gram)
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


def eval_volume(w, reg: Regularizer) -> float:
    """Evaluate the chosen volume penalty at W.

    det:     0.5 * det(W'W), returning 0 when W'W is numerically singular;
    logdet:  0.5 * log det(W'W + delta*I);
    nuclear: sum of the singular values of W.

    The determinant-based kinds go through a Cholesky factorization of the
    r-by-r Gram matrix, which is exact enough and cheap for small r.
    """
    w = as_matrix(w, "w")
    m, r = w.shape
    if r > m:
        raise DimensionError(f"w must have at least as many rows as columns, got {w.shape}")
    if reg.kind == VolumeKind.NUCLEAR:
        return float(np.sum(np.linalg.svd(w, compute_uv=False)))
    gram = w.T @ w
    if reg.kind == VolumeKind.DET:
        try:
            return 0.5 * float(np.exp(_gram_logdet(gram)))
        except np.linalg.LinAlgError:
            return 0.0
    delta = reg.concrete_delta
    return 0.5 * _gram_logdet(gram + delta * np.eye(r))


def eval_objective(x, w, h, lam: float, reg: Regularizer) -> ObjectiveValue:
    """Evaluate fit + lam * volume without forming the residual matrix.

    The fit term ``0.5 * ||x - w h||_F^2`` is expanded as
    ``0.5 * (||x||^2 - 2 <x h', w> + <w'w, h h'>)`` so the m-by-n product
    ``w h`` is never materialized; tiny negative round-off is clamped to 0.
    """
    x = as_matrix(x, "x")
    w = as_matrix(w, "w")
    h = as_matrix(h, "h")
    m, n = x.shape
    if w.shape[0] != m or h.shape[1] != n or w.shape[1] != h.shape[0]:
        raise DimensionError(
            f"shapes do not conform: x {x.shape}, w {w.shape}, h {h.shape}"
        )
    xht = x @ h.T
    hht = h @ h.T
    gram = w.T @ w
    fit = 0.5 * (float(np.sum(x * x)) - 2.0 * float(np.sum(xht * w)) + float(np.sum(gram * hht)))
    fit = max(fit, 0.0)
    volume = eval_volume(w, reg)
    return ObjectiveValue(fit=fit, volume=volume, lam=lam, total=fit + lam * volume)
