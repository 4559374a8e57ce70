"""Recovery of spatially varying advection/diffusion coefficients from
snapshot data of the PDE state, by Galerkin and collocation least squares."""

__version__ = "0.1.0"

from .basis import BasisSet, BoxDomain, build_basis
from .data_pipeline import (
    DenseSource,
    DerivativeEstimates,
    FilterConfig,
    SnapshotSet,
    add_noise,
    build_dense_source,
    estimate_derivatives_noiseless,
    estimate_derivatives_noisy,
    filter_snapshots,
    from_callables,
    load_snapshots,
    sample,
    save_snapshots,
)
from .diagnostics import (
    ConditioningReport,
    SeparabilityReport,
    conditioning_report,
    separability_scan,
)
from .forward_solver import (
    CoefficientFields,
    FluxSpec,
    SolutionTrajectory,
    SolverConfig,
    UnstableSolveError,
    solve,
)
from .quadrature import BoundaryRule, QuadratureRule, gauss_boundary, gauss_interior
from .recovery import (
    CoefficientSolution,
    GalerkinSystem,
    NonUniqueSolutionError,
    RecoveryConfig,
    build_system,
    evaluate_solution,
    solve_collocation,
    solve_galerkin,
)

__all__ = [name for name in dir() if not name.startswith("_")]
