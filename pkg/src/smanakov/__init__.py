"""Structure-preserving solvers and Monte Carlo studies for the stochastic Manakov equation."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    Blowup,
    DegenerateVariance,
    DivisibilityError,
    IncompatibleResolution,
    InvalidParams,
    ManakovError,
    NoConvergence,
    SingularSystem,
    ValidationError,
    ZeroMass,
)
from .field import (  # noqa: E402
    Grid1D,
    NonlinearitySpec,
    SpinorField,
    exact_soliton,
    h1_norm,
    hamiltonian,
    initial_condition,
    l2_norm,
    mass_center,
    pulse_width,
)
from .integrators import (  # noqa: E402
    Problem,
    SchemeConfig,
    Stepper,
    cn_step,
    exp_step,
    lt_step,
    relax_step,
    run_trajectory,
)
from .noise import WienerPath, increments_at, sample_path  # noqa: E402
from .propagator import LinearOperatorParams, build_propagator  # noqa: E402

__all__ = [
    "Blowup", "DegenerateVariance", "DivisibilityError", "IncompatibleResolution",
    "InvalidParams", "ManakovError", "NoConvergence", "SingularSystem", "ValidationError",
    "ZeroMass", "Grid1D", "NonlinearitySpec", "SpinorField", "exact_soliton", "h1_norm",
    "hamiltonian", "initial_condition", "l2_norm", "mass_center", "pulse_width", "Problem",
    "SchemeConfig", "Stepper", "cn_step", "exp_step", "lt_step", "relax_step",
    "run_trajectory", "WienerPath", "increments_at", "sample_path", "LinearOperatorParams",
    "build_propagator",
]
