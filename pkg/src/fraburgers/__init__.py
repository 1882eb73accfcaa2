"""Pseudospectral solver and verification lab for the forced fractal Burgers
equation u_t + u u_x + Lambda^alpha u = f on a periodic interval."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BlowUpError,
    CFLViolation,
    ConfigError,
    ContractViolation,
    DivergenceError,
    FraburgersError,
    MeanNotZero,
    NonContractionError,
    ParameterRangeError,
    SmallnessGateError,
    TailNotConverged,
)
from .spectral import (  # noqa: E402
    Grid,
    Params,
    RealField,
    Spectrum,
    dealias,
    derivative,
    forward,
    frac_laplacian,
    inv_frac_laplacian,
    inverse,
    semigroup,
    sobolev_norm,
    x_norm,
)
from .evolution import (  # noqa: E402
    EnergyLedger,
    EvolutionState,
    Trajectory,
    integrate,
    integrate_linear,
    nonlinear_flux,
    step,
)
from .steady import (  # noqa: E402
    IterationTrace,
    SmallnessReport,
    linear_steady_solve,
    picard_solve,
    smallness_gate,
    steady_via_time_integral,
    uniqueness_probe,
)
from .analysis import (  # noqa: E402
    cordoba_check,
    decay_experiment,
    level_set_energy,
    linf_bound_check,
    split_diagnostic,
    stability_experiment,
    truncate,
)
from .forcing import ForcingSpec, generate_forcing  # noqa: E402
