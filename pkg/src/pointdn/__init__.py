"""Numerical laboratory for one-point Dirichlet-to-Neumann data.

Forward simulation of Delta u + q u^m = 0 on the unit square, boundary
measurements against mollified point masses, higher-order linearization
identities, and two reconstruction pipelines for the potential q.
"""

__version__ = "0.1.0"

from .grid import (  # noqa: F401
    BoundaryData,
    Grid,
    ScalarField,
    apply_laplacian,
    boundary_pair,
    build_grid,
    normal_derivative,
    volume_integral,
)
from .linear_solve import (  # noqa: F401
    LinearSystem,
    SingularSystemError,
    SolverError,
    harmonic_extension,
    solve_dirichlet,
)
from .semilinear import (  # noqa: F401
    DELTA_DEFAULT,
    BranchEscape,
    DNRecord,
    NewtonParams,
    NonConvergence,
    SemilinearProblem,
    dn_map,
    solve_semilinear,
)
from .measure_data import (  # noqa: F401
    BoundaryMeasure,
    density_measure,
    duality_residual,
    lr_norm,
    mollified_point_mass,
    solve_measure_dirichlet,
    uniform_measure,
)
from .linearization import (  # noqa: F401
    LinearizationPlan,
    cascade_fields,
    cascade_oracle,
    mixed_difference_dn,
    three_way_report,
    volume_identity,
)
from .reconstruct import (  # noqa: F401
    CalderonPair,
    MeasurementSet,
    ReconstructionResult,
    assemble_moment_system,
    bump_basis,
    calderon_pair,
    fourier_lattice,
    fourier_measurements,
    moment_measurements,
    recover_q_fourier,
    relative_l2,
    simulate_measurement,
    tikhonov_solve,
    weight_field,
    with_noise,
)
