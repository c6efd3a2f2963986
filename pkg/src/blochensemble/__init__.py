"""Feedback stabilization of Bloch-equation ensembles.

Simulates finite (and truncated-countable) families of magnetization
vectors with shared transverse-field feedback, classifies the closed-loop
equilibria spectrally, and provides the convergence diagnostics (Lyapunov
traces, averaged Fourier coefficients, basin sampling, truncation
schedules) needed to check the stabilization claims numerically.

The integration hot loop runs in a compiled extension when available, with
a pure-numpy fallback selected automatically at import
(``blochensemble.backend.active_backend()`` reports which).
"""

from .backend import active_backend
from .core import (
    ControlValue,
    EnsembleState,
    FrequencySet,
    SpinState,
    WeightVector,
    geometric_weights,
    make_spin,
    random_ensemble,
    target_like,
    target_state,
    unit_weights,
    weighted_distance,
)
from .dynamics import (
    ControlLaw,
    CutoffParams,
    IntegratorConfig,
    LawKind,
    Method,
    Trajectory,
    bloch_rhs,
    closed_loop_rhs,
    control_value,
    cutoff_rhs,
    integrate,
    rde_rhs,
    step,
)
from .spectral import (
    Classification,
    Equilibrium,
    EquilibriumReport,
    LinearizationPair,
    enumerate_equilibria,
    invariance_defect,
    linearization,
    secular_residual,
    spectrum_at,
    vandermonde_det,
)
from .analysis import (
    BasinEstimate,
    ConvergenceSchedule,
    FourierCoefficients,
    OmegaLimit,
    basin_monte_carlo,
    bohr_fourier_closed,
    bohr_fourier_numeric,
    convergence_schedule,
    lyapunov,
    lyapunov_rate,
    lyapunov_trace,
    omega_limit,
)
from .experiment import ConfigError, RunSummary, ScenarioConfig, run_scenario

__version__ = "0.1.0"
