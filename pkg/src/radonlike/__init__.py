"""Computable tools for Radon-like averaging operators with bilinear phase.

The operator ``T_Q f(x, x') = int_{[-1,1]^n} f(x + t, x' + Q(x, t)) dt`` is
studied through its reduced pencil (curvature), Hurwitz-Radon matrix
families (feasibility), sublevel sets of ``|det Q(., t)|`` (exponents) and
grid discretizations (restricted-type ratios).
"""

__version__ = "0.1.0"

from .bilinear import (  # noqa: E402
    BilinearMap,
    adjoint,
    complex_multiplication,
    contract_left,
    contract_right,
    eval_q,
    inflation_jacobian,
    perturb_u,
    product_type,
    symmetrize,
    zero_map,
)
from .curvature import (  # noqa: E402
    CurvatureReport,
    MongeAmpereAssembly,
    SearchConfig,
    assemble_monge_ampere,
    curvature_verdict,
    reduced_pencil,
    sphere_min_abs_det,
)
from .errors import (  # noqa: E402
    DimensionError,
    DomainError,
    FitError,
    HypothesisError,
    InfeasibleError,
    RadonlikeError,
    ResolutionError,
    SchemaError,
)
from .hurwitz_radon import (  # noqa: E402
    FeasibilityReport,
    MatrixFamily,
    construct_family,
    dyadic_factor,
    family_to_bilinear,
    feasible,
    rho_bound,
    verify_family,
)
