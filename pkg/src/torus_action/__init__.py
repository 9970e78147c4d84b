"""Multi-periodic solutions of Poisson-gradient systems by action minimization.

The stationarity system laplacian(u) = grad F(t, u) on a period box is solved
by minimizing its action functional; certificates built from the averaged
potential decide solvability before any field iteration runs, and dense plus
finite-difference oracles cross-check every fast path.
"""

__version__ = "0.1.0"

from .certify import (
    CertifyOptions,
    Coercivity,
    ConsistencyError,
    MeanPotentialG,
    RayProbe,
    SolvabilityCertificate,
    Verdict,
    build_mean_potential,
    certify,
    coercivity_probe,
    find_stationary_mean,
    fluctuation_ratio,
    wirtinger_audit,
    wirtinger_constant,
)
from .grid import Field, TorusGrid, build_grid, integrate, node_coords
from .minimize import (
    SolveResult,
    SolveStatus,
    SolverOptions,
    default_init,
    divergence_monitor,
    newton_krylov_refine,
    solve,
)
from .operators import (
    ActionReport,
    DiffOperator,
    GradientField,
    ResidualReport,
    Scheme,
    action_gradient,
    action_value,
    dirichlet_form,
    eval_action,
    face_periodicity_audit,
    h1_inner,
    h1_precondition,
    l2_inner,
    l2_norm,
    laplacian,
    line_probe,
    mean_decompose,
    partials,
    pde_residual,
    weak_pairing,
)
from .oracle import (
    DenseSystem,
    NotPositiveDefiniteError,
    assemble_quadratic_system,
    dense_solve,
    fd_action_gradient,
    fd_directional_derivative,
)
from .potentials import (
    Convexity,
    Potential,
    PotentialBundle,
    TrigPath,
    TrigTerm,
    check_gradient,
    check_midpoint_convexity,
    check_path_resolvable,
    make_linear_drift,
    make_log_sum_exp,
    make_manufactured,
    make_quadratic_form,
    make_quadratic_shift,
    potential_from_dict,
)

__all__ = [name for name in dir() if not name.startswith("_")]
