"""fracsource: 1D time-fractional diffusion with a separable source.

Direct solver by eigenfunction expansion (variable coefficients, Dirichlet
ends, Caputo time derivative of order in (0,1)) and recovery of the
time-dependent source factor from an integral observation, via a well-posed
second-kind convolution equation solved by time marching with an independent
successive-substitution cross-check.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("fracsource")
except PackageNotFoundError:  # pragma: no cover - running from a checkout
    __version__ = "0.0.0.dev0"

from .errors import (
    CompatibilityError,
    ConfigError,
    FracsourceError,
    HypothesisError,
    NumericsError,
)
from .expr import Expression, TabulatedFunction, eval_expr, parse_expr
from .frac_calc import TimeGrid, TimeSeries, caputo_l1, rl_integral, rl_integral_by_parts
from .mittag_leffler import ml, ml_array, ml_batch
from .sturm_liouville import (
    ModeCoefficients,
    SpaceGrid,
    SpectralBasis,
    assemble_operator,
    energy_form,
    project,
    solve_eigs,
)
from .direct_solver import (
    DirectSolution,
    ProblemSpec,
    build_workspace,
    convolution_weights,
    mode_evolution,
    observe,
    solve,
    solve_direct,
)
from .inverse_solver import (
    InverseResult,
    assemble_operands,
    compatibility_check,
    invert,
    residual_first_kind,
    solve_picard,
    solve_second_kind,
)
from .harness import (
    ErrorReport,
    SynthDataset,
    compare,
    oracle_l1_fd,
    rel_linf,
    synthesize,
    verify_invariants,
)

__all__ = [
    "__version__",
    "FracsourceError", "ConfigError", "HypothesisError", "CompatibilityError",
    "NumericsError",
    "Expression", "TabulatedFunction", "parse_expr", "eval_expr",
    "TimeGrid", "TimeSeries", "caputo_l1", "rl_integral", "rl_integral_by_parts",
    "ml", "ml_array", "ml_batch",
    "SpaceGrid", "SpectralBasis", "ModeCoefficients",
    "assemble_operator", "solve_eigs", "project", "energy_form",
    "ProblemSpec", "DirectSolution", "build_workspace", "convolution_weights",
    "mode_evolution", "solve_direct", "observe", "solve",
    "InverseResult", "assemble_operands", "compatibility_check",
    "solve_second_kind", "solve_picard", "residual_first_kind", "invert",
    "SynthDataset", "ErrorReport", "synthesize", "oracle_l1_fd", "compare",
    "rel_linf", "verify_invariants",
]
