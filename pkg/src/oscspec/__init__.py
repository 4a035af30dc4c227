"""Fixed-point quantization solver and diagnostics for homogeneous anharmonic
oscillator spectra.

The package computes the spectrum of -d^2/dq^2 + q**(2M) as the fixed point
of the exact quantization operator, together with its asymptotic diagnostics
(drift, contraction constants, convergence rates) and an independent
finite-difference eigensolver used as ground truth.
"""

from .asymptotics import (
    BracketCertificate,
    BracketKind,
    ContractionReport,
    DriftReport,
    adapted_norm,
    contraction_closed,
    contraction_factor,
    contraction_integral,
    critical_exponent,
    critical_exponent_from_drift,
    drift_closed,
    drift_integral,
    drift_report,
    empirical_rate,
    lower_bracket,
    spectral_rate_estimate,
    upper_bracket,
    verify_bracket,
)
from .errors import (
    BracketFailure,
    ConditionViolation,
    DomainError,
    InsufficientData,
    InterlacingViolation,
    LengthMismatch,
    NoConvergence,
    NotSorted,
    OscspecError,
    ResolutionError,
    TailDivergence,
)
from .oracle import (
    OracleConfig,
    hamiltonian_eigenvalues,
    harmonic_reference_eigenvalues,
    parity_split,
    suggest_halfwidth,
)
from .oscillator import (
    OscillatorProblem,
    Parity,
    SpectrumResult,
    build_problem,
    compute_spectrum,
    growth_constant,
    merge_spectrum,
    seed_sequence,
    solve_parity,
)
from .quantize import (
    DerivativeMatrix,
    IterationTrace,
    KernelParams,
    OffsetSequence,
    OperatorConfig,
    StopRule,
    angle_kernel,
    apply_quantization,
    counting_component,
    counting_derivative,
    derivative_kernel,
    derivative_matrix,
    iterate,
)
from .sequences import (
    EnergySequence,
    LogSequence,
    Ordering,
    TailModel,
    WeightedNorm,
    log_coords,
    partial_compare,
    weighted_norm,
)

__version__ = "0.1.0"
