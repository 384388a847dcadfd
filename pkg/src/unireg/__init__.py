"""Uniform regularity of set collections and projection methods in R^n."""

from .cones import (
    Cone,
    FinitelyGenerated,
    ProductCone,
    Subspace,
    Trivial,
    diagonal_complement,
    normal_cone,
    product_cone,
    ray,
    strict_delta_cone,
)
from .constants import (
    Classification,
    RegularityReport,
    c_hat,
    c_hat_two_sets,
    classify,
    cone_pair_extremal_angle,
    eta_hat_m_sets,
    eta_hat_two_sets,
    nu_hat_two_sets,
    regularity_report,
)
from .errors import (
    AmbientDimensionTooLarge,
    DimensionError,
    InsufficientData,
    MethodArityError,
    NonConvergence,
    NonRegularPoint,
    ParseError,
    PointNotInIntersection,
    PointNotInSet,
    TrivialCone,
    UniregError,
    ValidationError,
)
from .geometry import AffineSubspace, Ball, HalfSpace, Hyperplane, Polyhedron, Union, distance, membership, project
from .lift import LiftedConstants, LiftedProblem, lifted_constants, lifted_equivalence_check
from .primal import PrimalReport, primal_report, theta_hat_estimate, theta_rho_bruteforce, vartheta_hat_estimate
from .solvers import (
    SolverConfig,
    Trace,
    alternating_projections,
    averaged_projections,
    averaged_via_lift,
    check_nonexpansive,
    cyclic_projections,
    estimate_rate,
    rate_vs_theory,
    super_regularity_probe,
)

__version__ = "0.1.0"
