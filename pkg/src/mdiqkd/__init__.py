"""Security analysis for loss-tolerant MDI-QKD with imperfect sources.

The pipeline turns raw lab data into a certified secret-key rate in four
stages, each usable on its own:

1. :mod:`mdiqkd.tomography` reconstructs the three source states from
   projective counts (maximum likelihood over a physical
   parameterization, Monte-Carlo error bars).
2. :mod:`mdiqkd.decoy` bounds the single-photon-pair yields from the
   multi-intensity gain table by linear programming.
3. :mod:`mdiqkd.losstol` converts yield intervals plus the measured
   (imperfect, filtered) states into a certified upper bound on the
   phase-error rate via the rejected-data transmission analysis.
4. :mod:`mdiqkd.keyrate` evaluates the secure key rate, and carries the
   basis-independence (quantum-coin) comparator that the loss-tolerant
   analysis is measured against.

:mod:`mdiqkd.simulate` provides the stand-in channel model for
rate-versus-distance sweeps, :mod:`mdiqkd.datasets` the bundled
measurement data, :mod:`mdiqkd.io` the file formats, and
:mod:`mdiqkd.cli` the ``mdiqkd`` command.
"""

from .errors import (
    ConvergenceError,
    DataInconsistencyError,
    DomainError,
    MdiqkdError,
    MissingDataError,
    ParseError,
    PhysicalityError,
    SingularSystemError,
)
from .qstate import (
    DensityMatrix,
    SourceCharacterization,
    StokesVector,
    VirtualState,
    density_from_stokes,
    fidelity,
    filter_q,
    filter_to_plane,
    rotate_to_common_Y,
    stokes_from_density,
    virtual_states,
)
from .tomography import (
    ProjectiveRecord,
    TomographyResult,
    WorstCaseResult,
    monte_carlo,
    normalize_count,
    projector,
    reconstruct_from_records,
    worst_case_states,
)
from .decoy import (
    DecoyConfig,
    GainCell,
    GainsTable,
    PAIR_ORDER,
    YieldBounds,
    bound_Q11Z,
    bound_all_pairs,
    bound_yield_11,
    pulse_counts,
)
from .losstol import (
    PauliTransmission,
    PhaseErrorBound,
    TransmissionSystem,
    bound_phase_error,
    build_system,
    phase_error_exact,
    solve_q_exact,
)
from .keyrate import (
    DEFAULT_EC_EFFICIENCY,
    GllpInputs,
    GllpPhaseError,
    KeyRateInputs,
    KeyRateResult,
    binary_entropy,
    gllp_delta_ini,
    gllp_flawed_states,
    gllp_phase_error,
    secure_key_rate,
)
from .simulate import (
    ChannelModel,
    SimulatedGains,
    SweepPoint,
    rate_at_point,
    run_sweep,
    simulate_gains,
    single_photon_yields,
)

__version__ = "1.0.0"

__all__ = [
    "__version__",
    # errors
    "MdiqkdError",
    "ConvergenceError",
    "DataInconsistencyError",
    "DomainError",
    "MissingDataError",
    "ParseError",
    "PhysicalityError",
    "SingularSystemError",
    # qubit algebra
    "DensityMatrix",
    "StokesVector",
    "SourceCharacterization",
    "VirtualState",
    "density_from_stokes",
    "stokes_from_density",
    "fidelity",
    "filter_q",
    "filter_to_plane",
    "rotate_to_common_Y",
    "virtual_states",
    # tomography
    "ProjectiveRecord",
    "TomographyResult",
    "WorstCaseResult",
    "normalize_count",
    "projector",
    "reconstruct_from_records",
    "monte_carlo",
    "worst_case_states",
    # decoy
    "DecoyConfig",
    "GainCell",
    "GainsTable",
    "YieldBounds",
    "PAIR_ORDER",
    "pulse_counts",
    "bound_yield_11",
    "bound_all_pairs",
    "bound_Q11Z",
    # phase error
    "PauliTransmission",
    "PhaseErrorBound",
    "TransmissionSystem",
    "build_system",
    "solve_q_exact",
    "phase_error_exact",
    "bound_phase_error",
    # key rate
    "DEFAULT_EC_EFFICIENCY",
    "KeyRateInputs",
    "KeyRateResult",
    "GllpInputs",
    "GllpPhaseError",
    "binary_entropy",
    "secure_key_rate",
    "gllp_flawed_states",
    "gllp_delta_ini",
    "gllp_phase_error",
    # simulation
    "ChannelModel",
    "SimulatedGains",
    "SweepPoint",
    "simulate_gains",
    "single_photon_yields",
    "rate_at_point",
    "run_sweep",
]
