"""Alternating solver: SPA initialization, W/H block updates, objective tracing.

The outer loop precomputes ``H H'`` and ``X H'`` once per iteration, runs the
W update for the configured volume penalty (several inner steps reusing the
precomputed products), then re-solves every abundance column, and records the
objective on a fixed cadence.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import ContractError, DegeneracyError, DimensionError
from .linalg import as_matrix, project_simplex_columns, spectral_norm_sq, svt
from .regularizers import ObjectiveValue, Regularizer, VolumeKind, eval_objective, resolve_delta
from .solver_h import ApgOptions, solve_h
from .solver_w import (
    WUpdateContext,
    logdet_majorizer,
    null_space_basis,
    update_w_det,
    update_w_logdet,
    update_w_nuclear,
)

STATUS_COMPLETED = "completed"
STATUS_RANK_COLLAPSE = "rank_collapse"
STATUS_EARLY_EXIT = "objective_plateau"


@dataclass(frozen=True)
class FactorPair:
    """A factorization (W, H): nonnegative basis, abundances in the simplex."""

    w: np.ndarray
    h: np.ndarray
    rank: int

    def __post_init__(self):
        w = as_matrix(self.w, "w")
        h = as_matrix(self.h, "h")
        if w.shape[1] != self.rank or h.shape[0] != self.rank:
            raise DimensionError(
                f"rank {self.rank} does not match w {w.shape}, h {h.shape}"
            )
        if np.min(w) < 0:
            raise ContractError("w must be nonnegative")
        if np.min(h) < -1e-15 or np.max(h.sum(axis=0)) > 1.0 + 1e-12:
            raise ContractError("every column of h must lie in the unit simplex")
        object.__setattr__(self, "h", np.maximum(h, 0.0))


@dataclass(frozen=True)
class SolverConfig:
    """Everything that influences a solver run.

    ``lam`` scales the volume penalty; ``seed`` does not affect the solver
    itself (which is deterministic) but is echoed into manifests so a run can
    be reproduced together with its data generation.
    """

    lam: float = 0.0
    reg: Regularizer = field(default_factory=Regularizer)
    outer_iters: int = 300
    h_opts: ApgOptions = field(default_factory=ApgOptions)
    w_inner_iters: int = 50
    w_rel_tol: float = 1e-9
    seed: int = 0
    trace_every: int = 1
    objective_rel_exit: float | None = None

    def __post_init__(self):
        if self.lam < 0:
            raise ContractError(f"lam must be nonnegative, got {self.lam}")
        if self.outer_iters < 1:
            raise ContractError(f"outer_iters must be >= 1, got {self.outer_iters}")
        if self.w_inner_iters < 1:
            raise ContractError(f"w_inner_iters must be >= 1, got {self.w_inner_iters}")
        if self.trace_every < 1:
            raise ContractError(f"trace_every must be >= 1, got {self.trace_every}")


@dataclass(frozen=True)
class TraceEntry:
    iteration: int
    objective: ObjectiveValue
    seconds: float


@dataclass
class ConvergenceTrace:
    """Objective values sampled along the outer iterations."""

    entries: list[TraceEntry] = field(default_factory=list)
    status: str = STATUS_COMPLETED

    @property
    def totals(self) -> list[float]:
        return [e.objective.total for e in self.entries]


def spa_init(x, r: int) -> tuple[np.ndarray, list[int]]:
    """Successive projection: greedy extreme-column selection.

    Repeatedly picks the residual column of largest norm (ties break to the
    lowest index) and projects the residual onto its orthogonal complement.
    Returns the selected original columns of ``x`` and their indices.
    """
    x = as_matrix(x, "x")
    m, n = x.shape
    if not 1 <= r <= min(m, n):
        raise DimensionError(f"r must satisfy 1 <= r <= min{x.shape}, got {r}")
    resid = x.copy()
    norms2 = np.einsum("ij,ij->j", resid, resid)
    floor = 1e-12 * float(np.sqrt(np.max(norms2))) if np.max(norms2) > 0 else 0.0
    indices: list[int] = []
    for _ in range(r):
        j = int(np.argmax(norms2))
        nrm = float(np.sqrt(max(norms2[j], 0.0)))
        if nrm <= floor:
            raise DegeneracyError(
                f"residual vanished after {len(indices)} picks; "
                f"x has fewer than {r} linearly independent columns"
            )
        indices.append(j)
        u = resid[:, j] / nrm
        resid -= np.outer(u, u @ resid)
        norms2 = np.einsum("ij,ij->j", resid, resid)
    return x[:, indices].copy(), indices


def _rank_collapsed(w: np.ndarray) -> bool:
    s = np.linalg.svd(w, compute_uv=False)
    return s[-1] <= 1e-12 * max(s[0], 1e-300)


def run(x, r: int, cfg: SolverConfig) -> tuple[FactorPair, ConvergenceTrace]:
    """Run the full alternating solver.

    Initializes W from successive projection and H from a full abundance
    solve, then alternates the configured W update with the H update for
    ``cfg.outer_iters`` iterations (optionally exiting early on an objective
    plateau).  Under the nuclear penalty a rank collapse of W terminates the
    loop early, returning the last valid iterate with a matching status.
    """
    x = as_matrix(x, "x")
    t0 = time.perf_counter()
    w, _ = spa_init(x, r)
    reg = resolve_delta(cfg.reg, w)
    h = solve_h(w, x, np.zeros((r, x.shape[1])), cfg.h_opts)

    trace = ConvergenceTrace()

    def record(iteration: int) -> ObjectiveValue:
        obj = eval_objective(x, w, h, cfg.lam, reg)
        trace.entries.append(
            TraceEntry(iteration=iteration, objective=obj, seconds=time.perf_counter() - t0)
        )
        return obj

    prev_total = record(0).total
    completed = 0
    for it in range(1, cfg.outer_iters + 1):
        hht = h @ h.T
        xht = x @ h.T
        ctx = WUpdateContext(
            hht=hht, xht=xht, lam=cfg.lam, reg=reg,
            inner_iters=cfg.w_inner_iters, rel_tol=cfg.w_rel_tol,
        )
        if reg.kind == VolumeKind.DET:
            w = update_w_det(w, ctx)
        elif reg.kind == VolumeKind.LOGDET:
            weights = logdet_majorizer(w, reg.concrete_delta)
            w = update_w_logdet(w, ctx, weights)
        else:
            w_new = update_w_nuclear(w, ctx)
            if _rank_collapsed(w_new):
                # Keep the last valid (w, h); the shrinkage zeroed a direction.
                trace.status = STATUS_RANK_COLLAPSE
                break
            w = w_new
        h = solve_h(w, x, h, cfg.h_opts)
        completed = it

        if it % cfg.trace_every == 0 or it == cfg.outer_iters:
            total = record(it).total
            if cfg.objective_rel_exit is not None:
                if abs(prev_total - total) <= cfg.objective_rel_exit * max(1.0, abs(prev_total)):
                    trace.status = STATUS_EARLY_EXIT
                    break
            prev_total = total

    if trace.entries[-1].iteration < completed:
        record(completed)
    return FactorPair(w=w, h=h, rank=r), trace


def stationarity_residuals(x, w, h, lam: float, reg: Regularizer) -> tuple[float, float]:
    """Per-block projected-gradient residuals at (w, h).

    Measures, for each block with the other held fixed, the Frobenius norm of
    the displacement of one projected gradient step (step 1/L) -- on the fit
    objective for H and on the active surrogate (anchored at ``w``) for W.
    Both vanish at a first-order stationary point.
    """
    x = as_matrix(x, "x")
    w = as_matrix(w, "w")
    h = as_matrix(h, "h")
    gram = w.T @ w
    lip_h = spectral_norm_sq(gram)
    grad_h = gram @ h - w.T @ x
    h_step = project_simplex_columns(h - grad_h / lip_h)
    res_h = float(np.linalg.norm(h_step - h))

    hht = h @ h.T
    xht = x @ h.T
    if reg.kind == VolumeKind.DET:
        sq = 0.0
        r = w.shape[1]
        for i in range(r):
            h2 = float(hht[i, i])
            if h2 <= 0.0:
                continue
            if r == 1:
                gamma, q_basis = 1.0, None
                c = xht[:, 0]
            else:
                w_minus = np.delete(w, i, axis=1)
                gamma = float(np.linalg.det(w_minus.T @ w_minus))
                q_basis = null_space_basis(w_minus)
                c = xht[:, i] - w_minus @ np.delete(hht[:, i], i)
            wi = w[:, i]
            if q_basis is None:
                awi = (h2 + lam * gamma) * wi
            else:
                awi = h2 * wi + lam * gamma * (q_basis @ (q_basis.T @ wi))
            lip = h2 + lam * gamma
            step = np.maximum(wi - (awi - c) / lip, 0.0)
            sq += float(np.sum((step - wi) ** 2))
        res_w = float(np.sqrt(sq))
    elif reg.kind == VolumeKind.LOGDET:
        d = logdet_majorizer(w, reg.concrete_delta).d
        quad = hht + lam * d
        lip = spectral_norm_sq(quad)
        step = np.maximum(w - (w @ quad - xht) / lip, 0.0)
        res_w = float(np.linalg.norm(step - w))
    else:
        lip = spectral_norm_sq(hht)
        step = np.maximum(svt(w - (w @ hht - xht) / lip, lam / lip), 0.0)
        res_w = float(np.linalg.norm(step - w))
    return res_h, res_w


def with_lambda(cfg: SolverConfig, lam: float) -> SolverConfig:
    """Copy of ``cfg`` with a different penalty weight."""
    return replace(cfg, lam=lam)
