"""Penalty-weight tuning against a known ground truth.

The raw weight is parametrized as ``lam = lam_tilde * fit0 / |vol0|`` where
``fit0`` and ``vol0`` are the data-fit and volume at the initial (successive
projection) solution, so ``lam_tilde`` lives on a problem-independent scale.
``lam_tilde`` is searched over [1e-6, 0.5] by a greedy interval bisection
driven by the recovery score, with every evaluation cached.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .driver import SolverConfig, run, spa_init
from .exceptions import InfeasibleError, VrnmfError
from .metrics import mrsa_matched
from .regularizers import eval_objective, eval_volume, resolve_delta
from .solver_h import solve_h

SEARCH_LO = 1e-6
SEARCH_HI = 0.5
MAX_ROUNDS = 20
VALUE_TOL = 1e-4
FAILURE_SCORE = 100.0


@dataclass(frozen=True)
class TuneResult:
    """Outcome of one tuning search."""

    lambda_tilde: float
    lam: float
    mrsa: float
    evaluations: list[tuple[float, float]]
    bisection_rounds: int


@dataclass
class BisectOutcome:
    """Raw bisection state: best cached point, all evaluations, final interval."""

    best_x: float
    best_value: float
    evaluations: list[tuple[float, float]] = field(default_factory=list)
    rounds: int = 0
    interval: tuple[float, float] = (SEARCH_LO, SEARCH_HI)


def greedy_bisect(
    evaluate,
    lo: float = SEARCH_LO,
    hi: float = SEARCH_HI,
    max_rounds: int = MAX_ROUNDS,
    value_tol: float = VALUE_TOL,
) -> BisectOutcome:
    """Greedy interval halving on a scalar score function.

    Each round splits the current interval at its midpoint, scores the two
    halves by the sum of their endpoint values, and recurses into the
    lower-sum half; a tie bisects both halves once and keeps the one whose
    new midpoint scores lower.  Stops after ``max_rounds`` rounds or when
    consecutive midpoint values differ by at most ``value_tol``.  Every
    point is evaluated at most once; the returned best is the argmin over
    the whole evaluation cache, not merely the last midpoint.
    """
    cache: dict[float, float] = {}

    def value(x: float) -> float:
        if x not in cache:
            cache[x] = float(evaluate(x))
        return cache[x]

    a, b = lo, hi
    c = 0.5 * (a + b)
    for x in (a, b, c):
        value(x)

    rounds = 0
    while rounds < max_rounds:
        rounds += 1
        sum_lo = value(a) + value(c)
        sum_hi = value(c) + value(b)
        if sum_lo < sum_hi:
            a, b = a, c
            c_new = 0.5 * (a + b)
            value(c_new)
        elif sum_hi < sum_lo:
            a, b = c, b
            c_new = 0.5 * (a + b)
            value(c_new)
        else:
            m_lo = 0.5 * (a + c)
            m_hi = 0.5 * (c + b)
            if value(m_lo) <= value(m_hi):
                a, b, c_new = a, c, m_lo
            else:
                a, b, c_new = c, b, m_hi
        done = abs(value(c_new) - value(c)) <= value_tol
        c = c_new
        if done:
            break

    best_x = min(cache, key=lambda x: (cache[x], x))
    return BisectOutcome(
        best_x=best_x,
        best_value=cache[best_x],
        evaluations=list(cache.items()),
        rounds=rounds,
        interval=(a, b),
    )


def _init_scale(x, r: int, cfg: SolverConfig) -> tuple[float, SolverConfig]:
    """fit/|volume| at the successive-projection start, plus the config with
    the logdet floor pinned to that start."""
    w0, _ = spa_init(x, r)
    reg = resolve_delta(cfg.reg, w0)
    cfg = replace(cfg, reg=reg)
    h0 = solve_h(w0, x, np.zeros((r, x.shape[1])), cfg.h_opts)
    obj = eval_objective(x, w0, h0, 0.0, reg)
    vol0 = eval_volume(w0, reg)
    if vol0 == 0.0:
        raise InfeasibleError("initial volume is zero; the penalty weight cannot be scaled")
    return obj.fit / abs(vol0), cfg


def _score_once(x, w_true, r: int, cfg: SolverConfig, lam: float) -> float:
    try:
        pair, _ = run(x, r, replace(cfg, lam=lam))
        score, _ = mrsa_matched(pair.w, w_true)
        return score
    except (VrnmfError, np.linalg.LinAlgError):
        return FAILURE_SCORE


def tune_lambda(x, w_true, r: int, cfg_base: SolverConfig) -> TuneResult:
    """Tune the penalty weight by greedy bisection on the recovery score.

    Runs the full solver once per candidate ``lam_tilde`` (cached) and scores
    the recovered basis against ``w_true``; a failed run scores 100.  Returns
    the best evaluated candidate.
    """
    scale, cfg = _init_scale(x, r, cfg_base)
    outcome = greedy_bisect(lambda lt: _score_once(x, w_true, r, cfg, lt * scale))
    return TuneResult(
        lambda_tilde=outcome.best_x,
        lam=outcome.best_x * scale,
        mrsa=outcome.best_value,
        evaluations=outcome.evaluations,
        bisection_rounds=outcome.rounds,
    )


def _grid_worker(args) -> float:
    x, w_true, r, cfg, lam = args
    return _score_once(x, w_true, r, cfg, lam)


def grid_lambda(
    x,
    w_true,
    r: int,
    cfg_base: SolverConfig,
    num: int = 100,
    workers: int | None = None,
) -> TuneResult:
    """Exhaustive reference search over ``num`` equally spaced ``lam_tilde``.

    ``workers`` > 1 fans the independent runs out over processes (0 or None
    reads VRNMF_THREADS, defaulting to serial).
    """
    scale, cfg = _init_scale(x, r, cfg_base)
    grid = np.linspace(SEARCH_LO, SEARCH_HI, num)
    if not workers:
        workers = int(os.environ.get("VRNMF_THREADS", "1") or 1) or (os.cpu_count() or 1)
    if workers > 1:
        jobs = [(x, w_true, r, cfg, lt * scale) for lt in grid]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(_grid_worker, jobs, chunksize=max(1, num // (4 * workers))))
    else:
        values = [_score_once(x, w_true, r, cfg, lt * scale) for lt in grid]
    evaluations = [(float(lt), float(v)) for lt, v in zip(grid, values)]
    best_i = int(np.lexsort((grid, values))[0])
    return TuneResult(
        lambda_tilde=float(grid[best_i]),
        lam=float(grid[best_i]) * scale,
        mrsa=float(values[best_i]),
        evaluations=evaluations,
        bisection_rounds=0,
    )
