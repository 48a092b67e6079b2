"""Energy minimization over rank-N orthogonal projectors.

Riemannian gradient descent, damped SCF and their relatives, the spectral
tools that predict their linear convergence rates, and a handful of small
lattice models to run them on.
"""
from .errors import (
    AufbauDegenerate,
    ConfigError,
    EigensolverFailure,
    GapTooSmall,
    GrassmannError,
    InsufficientData,
    LineSearchFailure,
    NonphysicalDensity,
    NotAProjector,
    NotCritical,
    RetractionRankMismatch,
)
from .manifold import (
    SpectralDecomposition,
    check_projector,
    is_on_manifold,
    is_tangent,
    manifold_distance,
    random_projector,
    random_tangent,
    retract,
    spectral_decompose,
    tangent_project,
)
from .models import (
    ChaosModel,
    EnergyModel,
    GrossPitaevskii1D,
    LinearModel,
    ToyGapModel,
    toy_analytic_minimizer,
)
from .solvers import (
    OccupationState,
    SolverConfig,
    SolverTrace,
    anderson_mixing,
    aufbau_projector,
    damped_scf,
    damped_scf_nonretracted,
    gradient_descent,
    oda,
    roothaan_scf,
    scf_diagnostics,
)
from .spectral import (
    RateReport,
    TangentBasis,
    build_jacobian,
    jacobian_fd,
    observed_rate,
    omega_apply,
    omega_inverse_apply,
    spectral_radius,
)

__version__ = "0.1.0"
