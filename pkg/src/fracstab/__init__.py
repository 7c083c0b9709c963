"""fracstab: a numerical laboratory for stable solutions of the fractional
semilinear Dirichlet problem in the unit ball.

The package covers kernel and constant calibration for the weighted
harmonic extension, evaluation of the extension and its flux, the
dimension/order regime thresholds, the flux-identity constant with its
Monte Carlo oracle, a radial collocation solver with pseudo-arclength
continuation of the minimal branch, and the stability-based integral
checks that apply to computed branch states.
"""

from .core import (
    Normalizations,
    Params,
    log_gamma,
    normalizations,
)
from .errors import AccuracyError, DomainError, NewtonFailure
from .extension import (
    ExtensionField,
    RadialFunction,
    TailedRadialFunction,
    extend,
    flux_limit,
    riesz_bound,
    vy_from_flux,
)
from .flux import (
    FluxConstantQuery,
    flux_moment_check,
    ibp_residual,
    magic_constant,
    magic_constant_mc,
)
from .regimes import (
    CriticalOrder,
    RegimeReport,
    classify,
    critical_s_gelfand,
    critical_s_radial,
    decay_exponent_floor,
)
from .solver import (
    Branch,
    BranchPoint,
    ContinuationControls,
    DiscreteOperator,
    EXP_NONLINEARITY,
    Nonlinearity,
    assemble,
    boundary_exponent,
    continue_branch,
    graded_grid,
    monotonicity_check,
    newton_solve,
    principal_eigenvalue,
)
from .stability import (
    WeightedDirichletQuery,
    decay_profile_check,
    lp_sweep,
    stability_form,
    weighted_dirichlet,
)

__version__ = "0.1.0"

__all__ = [
    "AccuracyError",
    "Branch",
    "BranchPoint",
    "ContinuationControls",
    "CriticalOrder",
    "DiscreteOperator",
    "DomainError",
    "EXP_NONLINEARITY",
    "ExtensionField",
    "FluxConstantQuery",
    "NewtonFailure",
    "Nonlinearity",
    "Normalizations",
    "Params",
    "RadialFunction",
    "RegimeReport",
    "TailedRadialFunction",
    "WeightedDirichletQuery",
    "assemble",
    "boundary_exponent",
    "classify",
    "continue_branch",
    "critical_s_gelfand",
    "critical_s_radial",
    "decay_exponent_floor",
    "decay_profile_check",
    "extend",
    "flux_limit",
    "flux_moment_check",
    "graded_grid",
    "ibp_residual",
    "log_gamma",
    "lp_sweep",
    "magic_constant",
    "magic_constant_mc",
    "monotonicity_check",
    "newton_solve",
    "normalizations",
    "principal_eigenvalue",
    "riesz_bound",
    "stability_form",
    "vy_from_flux",
    "weighted_dirichlet",
]
