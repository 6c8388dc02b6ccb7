"""owlsc: subspace clustering with Ordered Weighted l1 (OWL) regression.

Submodules
----------
owl          OWL norm, dual norm, ramp weights and the proximal operator
solvers      FISTA for OWL/Lasso regression, ADMM for basis pursuit
geometry     union-of-subspaces generators, affinity, random geometric graphs
pipeline     OSC: seed regressions, affinity, spectral clustering, errors
experiments  sweeps over k, affinity, density and noise; ROC; CSV output
validation   Monte Carlo property suites and constant calibration
cli          the ``owlsc`` command
"""
from .exceptions import (
    DimensionError,
    InfeasibleError,
    InvalidInputError,
    InvalidParameterError,
    OutputError,
    OwlscError,
    ParseError,
)
from .geometry import (
    NoiseConfig,
    SubspaceBasis,
    TheoremBounds,
    UnionOfSubspaces,
    add_noise,
    affinity,
    build_delta_rgg,
    generate_b1,
    generate_b2,
    generate_orthogonal,
    principal_angles,
    rgg_connected,
    rgg_sample_bound,
    sample_union,
)
from .owl import (
    RampParams,
    make_ramp_weights,
    min_gap,
    oscar_weights,
    owl_dual_norm,
    owl_norm,
    prox_owl,
)
from .pipeline import (
    ClusteringResult,
    ExactL1,
    Lasso,
    OscConfig,
    OwlRamp,
    clustering_error,
    greedy_peel,
    run_osc,
    spectral_clustering,
)
from .solvers import (
    SolverConfig,
    SolverResult,
    solve_basis_pursuit,
    solve_lasso,
    solve_owl,
)

__version__ = "0.1.0"
