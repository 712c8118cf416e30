"""Monotone simulation and blow-up certificates for a two-species
self-diffusion system with zero-flux boundaries.

The heart of the package is a backward-Euler scheme in the transformed
variable h = (d + alpha*u)u, driven between ordered upper and lower
iterate sequences so every accepted step carries a discrete comparison
certificate. Around it: parameter-regime classification (global
confinement vs certified finite-time blow-up of a weighted average),
a spatially homogeneous ODE oracle for cross-checks, and a CLI that
turns config files into CSV/JSON artifacts.
"""

from .blowup import (
    BlowupReport,
    TrajectoryRow,
    WeightedAverage,
    analyze,
    riccati_bound,
    weighted_average,
)
from .config import InitialSpec, RunConfig, build_initial_fields, load_config
from .errors import (
    BracketConstructionError,
    ConfigError,
    ConvergenceError,
    NumericalError,
    OrderingViolationError,
    SktLabError,
)
from .grid import (
    EigenPair,
    Grid,
    ScalarField,
    neumann_laplacian,
    principal_eigenpair,
    weighted_integral,
)
from .iteration import (
    IterateRecord,
    IterationTrace,
    SimulationResult,
    SolverConfig,
    SystemState,
    TraceSummary,
    initial_bracket,
    simulate,
    step_monotone,
)
from .model import (
    GrowthConstants,
    ModelParams,
    growth_constants,
    growth_lower_bound,
    reaction,
    transform_forward,
    transform_inverse,
)
from .oracle import (
    OdeTrajectory,
    ode_reduce,
    riccati_closed_form,
    riccati_singularity_time,
)
from .regimes import (
    BlowupCertificate,
    InequalityRecord,
    RegimeReport,
    classify_blowup,
    classify_global,
    search_multipliers,
    t0_estimate,
)

__version__ = "0.1.0"

__all__ = [
    "BlowupCertificate",
    "BlowupReport",
    "BracketConstructionError",
    "ConfigError",
    "ConvergenceError",
    "EigenPair",
    "Grid",
    "GrowthConstants",
    "InequalityRecord",
    "InitialSpec",
    "IterateRecord",
    "IterationTrace",
    "ModelParams",
    "NumericalError",
    "OdeTrajectory",
    "OrderingViolationError",
    "RegimeReport",
    "RunConfig",
    "ScalarField",
    "SimulationResult",
    "SktLabError",
    "SolverConfig",
    "SystemState",
    "TraceSummary",
    "TrajectoryRow",
    "WeightedAverage",
    "analyze",
    "build_initial_fields",
    "classify_blowup",
    "classify_global",
    "growth_constants",
    "growth_lower_bound",
    "initial_bracket",
    "load_config",
    "neumann_laplacian",
    "ode_reduce",
    "principal_eigenpair",
    "reaction",
    "riccati_bound",
    "riccati_closed_form",
    "riccati_singularity_time",
    "search_multipliers",
    "simulate",
    "step_monotone",
    "t0_estimate",
    "transform_forward",
    "transform_inverse",
    "weighted_average",
    "weighted_integral",
    "__version__",
]
