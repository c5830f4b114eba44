"""Numerical laboratory for self-concordant barriers and their Schrodinger
operators.

Build a barrier, discretize the flat or Hessian-metric operator on a grid,
eigensolve, and check the spectral-gap / ground-state-overlap / localization
claims at desk scale; the anneal module follows the central path with pi/3
fixed-point rotations and a quadrature-of-unitaries ground-state projector.
The `lab` command (barrierlab.cli) drives the same checks from TOML specs.
"""

from .anneal import (
    AnnealTrace,
    ProjectorConfig,
    QuantumState,
    amplification_depth,
    hs_projector_apply,
    quantum_central_path,
    run_annealing,
    two_register_emulation,
)
from .barrier import (
    Barrier,
    barrier_parameter_estimate,
    box_barrier,
    check_self_concordance,
    from_descriptor,
    halfline_barrier,
    interval_barrier,
    polytope_barrier,
    quadratic_potential,
    sobol_interior_samples,
)
from .centralpath import (
    EtaSchedule,
    PathPoint,
    center,
    check_path_stability,
    duality_gap_check,
    eta_schedule,
    follow_path,
)
from .errors import (
    BarrierLabError,
    ConfigError,
    ConstructionError,
    DegenerateGapError,
    DomainError,
    NonConvergenceError,
    NormalizationError,
    PreconditionError,
    QuadratureError,
)
from .operator import (
    DiscreteOperator,
    Grid,
    build_euclidean,
    build_harmonic,
    build_riemannian,
    bump_pair,
    default_grid,
    dump_operator,
    load_operator_matrix,
    operator_for_barrier,
)
from .spectra import (
    GapTable,
    GridPolicy,
    gap_experiment,
    ground_overlap_check,
    harmonic_reference,
    ims_identity_check,
    lowest_eigenpairs,
    minimizer_of_potential,
)

__version__ = "0.1.0"
