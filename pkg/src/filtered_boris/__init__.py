"""Filtered Boris integrators for charged particles in strong magnetic fields."""
__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BorisError,
    DegenerateField,
    FilterPole,
    GridMismatch,
    InsufficientData,
    NearResonance,
    NoConvergence,
    OracleNotConverged,
    SingularMatrix,
    StepError,
    ZeroField,
)
from .fields import FieldModel, ResonanceGuard, check_resonance, make_preset  # noqa: E402
from .integrators import (  # noqa: E402
    MethodConfig,
    ParticleState,
    Trajectory,
    Variant,
    one_step_map,
    run_trajectory,
    starting_velocity,
    step,
)
from .reference import ReferenceCache, compute_errors, reference_solve  # noqa: E402
