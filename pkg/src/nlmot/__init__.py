"""Non-linear martingale optimal transport over curtain couplings.

Solve sup over martingale couplings of the expected concave gain of the
conditional transform spread, for finitely supported first marginals, with
brute-force LP oracles, a discretization pipeline for continuous first
marginals, and static superreplication bounds.
"""

from .curtain import (
    Coupling,
    CurtainCertificate,
    build_curtain,
    compose,
    enumerate_curtains,
    is_curtain,
)
from .gains import (
    Affine,
    ConcavePower,
    GainSpec,
    Identity,
    PiecewiseLinearConcave,
    PiecewiseLinearConvex,
    PowerAbs,
    Quadratic,
    Sqrt,
    VixLog,
)
from .measures import (
    Atom,
    DiscreteMarginal,
    DomainInterval,
    PieceMeasure,
    Uniform,
    convex_order_leq,
    convex_order_report,
    discretize_conditional_mean,
    extremal_submeasure,
)
from .oracle import (
    CouplingPolytope,
    direct_concave_max,
    hull_membership,
    lp_max,
    simplex_solve,
)
from .serialize import Instance
from .solver import (
    SolveResult,
    VertexSet,
    approx_solve,
    build_vertex_set,
    check_flat,
    dyadic_cuts,
    evaluate_J,
    mix,
    solve_finite,
    solve_two_point,
    upper_bound,
    x0_vector,
)
from .superrep import (
    LiftedCoupling,
    Portfolio,
    build_portfolio,
    lift,
    portfolio_price,
    solve_b_star,
    verify_superrep,
)

__version__ = "0.1.0"
