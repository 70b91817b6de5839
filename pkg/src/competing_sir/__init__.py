"""Competing multi-virus SIR epidemics on networks.

Simulation, exponential-eradication certificates, local observability from
aggregated symptoms, and Luenberger estimation of the hidden per-virus states.
"""

from .model import (
    EpidemicState,
    ModelConfig,
    SimplexDriftError,
    Trajectory,
    VirusParams,
    Violation,
    conservation_residual,
    make_config,
    output,
    simulate,
    state_from_infections,
    step,
    validate,
)
from .observability import (
    ObservabilityReport,
    SingularSystem,
    WindowOutOfRange,
    build_O_trajectory,
    build_O_zero,
    check_local_observability,
    reconstruct_window,
)
from .observer import ObserverConfig, ObserverRun, observer_step, run_observer
from .scenario import ParseError, Scenario, ScenarioValidationError, load_bundled, parse_scenario
from .stability import (
    NotSchurError,
    StabilityReport,
    VerificationFailed,
    VirusCertificate,
    build_M,
    build_M_tilde,
    certify,
    find_diagonal_lyapunov,
    spectral_radius,
    stability_report,
)

__version__ = "0.1.0"
