"""Volume-regularized nonnegative matrix factorization for blind unmixing.

The solver factors a nonnegative data matrix X (spectra by pixels) into a
nonnegative basis W (endmember signatures) and abundances H constrained to
the unit simplex, while penalizing the volume spanned by the columns of W
with one of three regularizers (det, logdet, nuclear).  The package also
ships the surrounding experimental machinery: synthetic data generation with
controllable non-separability, recovery scoring, penalty-weight tuning, and
a command-line front end.
"""

__version__ = "0.1.0"

from .driver import (
    ConvergenceTrace,
    FactorPair,
    SolverConfig,
    TraceEntry,
    run,
    spa_init,
    stationarity_residuals,
)
from .exceptions import (
    ContractError,
    DegeneracyError,
    DimensionError,
    InfeasibleError,
    NonFiniteError,
    SolverError,
    VrnmfError,
)
from .linalg import (
    SvdTriple,
    null_space_basis,
    project_simplex,
    spectral_norm_sq,
    svd_triple,
    svt,
)
from .metrics import (
    matched_pair_scores,
    mrsa_matched,
    mrsa_pair,
    recovery_curve,
    segmentation_map,
)
from .regularizers import (
    ObjectiveValue,
    Regularizer,
    VolumeKind,
    eval_objective,
    eval_volume,
    resolve_delta,
)
from .solver_h import ApgOptions, solve_h, solve_h_column
from .solver_w import (
    MajorizerWeights,
    WUpdateContext,
    logdet_majorizer,
    logdet_surrogate,
    update_w_det,
    update_w_logdet,
    update_w_nuclear,
)
from .synth import SyntheticSpec, synth_generate
from .tuning import TuneResult, greedy_bisect, grid_lambda, tune_lambda

__all__ = [
    "__version__",
    "ApgOptions",
    "ContractError",
    "ConvergenceTrace",
    "DegeneracyError",
    "DimensionError",
    "FactorPair",
    "InfeasibleError",
    "MajorizerWeights",
    "NonFiniteError",
    "ObjectiveValue",
    "Regularizer",
    "SolverConfig",
    "SolverError",
    "SvdTriple",
    "SyntheticSpec",
    "TraceEntry",
    "TuneResult",
    "VolumeKind",
    "VrnmfError",
    "WUpdateContext",
    "eval_objective",
    "eval_volume",
    "greedy_bisect",
    "grid_lambda",
    "logdet_majorizer",
    "logdet_surrogate",
    "matched_pair_scores",
    "mrsa_matched",
    "mrsa_pair",
    "null_space_basis",
    "project_simplex",
    "recovery_curve",
    "resolve_delta",
    "run",
    "segmentation_map",
    "solve_h",
    "solve_h_column",
    "spa_init",
    "spectral_norm_sq",
    "stationarity_residuals",
    "svd_triple",
    "svt",
    "synth_generate",
    "tune_lambda",
    "update_w_det",
    "update_w_logdet",
    "update_w_nuclear",
]
