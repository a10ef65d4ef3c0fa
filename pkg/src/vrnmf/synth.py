"""Synthetic mixing-data generation with controllable non-separability.

Abundance columns are Dirichlet draws (sampled as normalized Gamma variates
from a seeded PCG64 generator); a per-endmember purity cap ``p_j < 1``
rejects any column whose j-th abundance exceeds ``p_j``, removing pure pixels
for that endmember.  Gaussian noise is added to the clean mixture and
negatives are clamped to zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ContractError, InfeasibleError
from .linalg import as_matrix, as_vector


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for one synthetic data set.

    ``noise_sigma`` is the standard deviation of the Gaussian noise entries;
    set ``sigma_is_variance`` to interpret it as a variance instead.
    """

    w_true: np.ndarray
    n: int = 1000
    p: np.ndarray | None = None
    dirichlet_alpha: float = 0.1
    noise_sigma: float = 0.0
    seed: int = 0
    max_resamples: int | None = None
    sigma_is_variance: bool = False

    def __post_init__(self):
        w = as_matrix(self.w_true, "w_true")
        if np.min(w) < 0:
            raise ContractError("w_true must be nonnegative")
        object.__setattr__(self, "w_true", w)
        r = w.shape[1]
        p = np.ones(r) if self.p is None else as_vector(self.p, "p")
        if p.size != r:
            raise ContractError(f"p must have length {r}, got {p.size}")
        if np.any(p > 1.0):
            raise InfeasibleError("purity entries must be at most 1")
        if np.any(p <= 1.0 / r):
            # A column summing to 1 has max entry >= 1/r, so such caps
            # reject every draw.
            raise InfeasibleError(
                f"purity entries must exceed 1/r = {1.0 / r:.6g} to be satisfiable"
            )
        object.__setattr__(self, "p", p)
        if self.dirichlet_alpha <= 0:
            raise ContractError("dirichlet_alpha must be positive")
        if self.noise_sigma < 0:
            raise ContractError("noise_sigma must be nonnegative")
        if self.n < 1:
            raise ContractError("n must be positive")
        if self.max_resamples is None:
            object.__setattr__(self, "max_resamples", 1000 * self.n)

    @property
    def rank(self) -> int:
        return self.w_true.shape[1]

    @property
    def noise_std(self) -> float:
        return float(np.sqrt(self.noise_sigma)) if self.sigma_is_variance else self.noise_sigma


def synth_generate(spec: SyntheticSpec) -> tuple[np.ndarray, np.ndarray]:
    """Draw (X, H_true) according to the spec.

    Returns the observed matrix ``X = [w_true @ H + noise]_+`` and the
    accepted abundance matrix whose row maxima respect the purity caps.
    Raises :class:`InfeasibleError` when the resample budget runs out before
    ``n`` columns are accepted.
    """
    rng = np.random.default_rng(spec.seed)
    r = spec.rank
    separable = bool(np.all(spec.p >= 1.0))

    cols: list[np.ndarray] = []
    drawn = 0
    accepted = 0
    batch = max(spec.n, 256)
    while accepted < spec.n:
        budget = spec.max_resamples - drawn
        if budget <= 0:
            rate = accepted / max(drawn, 1)
            raise InfeasibleError(
                f"resample budget {spec.max_resamples} exhausted with "
                f"{accepted}/{spec.n} columns accepted (acceptance rate {rate:.4g})"
            )
        take = min(batch, budget)
        g = rng.gamma(spec.dirichlet_alpha, 1.0, size=(r, take))
        sums = g.sum(axis=0)
        ok = sums > 0  # guards against total underflow at tiny alpha
        h = g[:, ok] / sums[ok]
        drawn += take
        if not separable:
            h = h[:, np.all(h <= spec.p[:, None], axis=0)]
        if h.shape[1]:
            cols.append(h)
            accepted += h.shape[1]

    h_true = np.concatenate(cols, axis=1)[:, : spec.n]
    x = spec.w_true @ h_true
    sd = spec.noise_std
    if sd > 0:
        x = np.maximum(x + sd * rng.standard_normal(x.shape), 0.0)
    return x, h_true
