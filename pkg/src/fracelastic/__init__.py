"""Lattice models with power-law spatial dispersion and their fractional continuum limits."""

__version__ = "0.1.0"

from .compare import (
    ConvergenceReport,
    fit_power_law,
    map_lattice_to_continuum,
    periodic_green_1d,
    static_convergence_study,
)
from .dispersion import (
    DispersionLaw,
    LatticeKernel,
    LatticeSpec,
    dispersion_relation,
    eval_lattice_dispersion,
    eval_target_dispersion,
    synthesize_kernel,
)
from .errors import (
    ConvergenceError,
    DegenerateNormalizationError,
    FracElasticError,
    NumericalDiagnostic,
    SingularSystemError,
    StabilityError,
    ValidationError,
)
from .fraclap import (
    GridField,
    HyperSingularConfig,
    am_constant,
    dn_constant,
    finite_difference,
    hypersingular_frac_laplacian,
    spectral_frac_laplacian,
)
from .green import (
    ContinuumParams,
    QuadratureConfig,
    displacement_field_convolution,
    displacement_point_force,
    farfield_series,
    green_radial,
    nearfield_gradient,
)
from .lattice import (
    ExternalForce,
    LatticeState,
    acceleration,
    solve_static,
    step_dynamics,
    total_energy,
)
