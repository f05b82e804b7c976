"""Stability certificates for x' = -P(t) x from excitation double integrals."""
from .criteria import (
    CriterionConfig,
    StabilityCertificate,
    Verdict,
    classical_pe,
    gpe_lower,
    gpe_upper,
    simple_corollary,
    weighted_corollary,
)
from .errors import GenPEError
from .signal import (
    ClosedFormSignal,
    PiecewiseConstantSignal,
    RegressorSignal,
    SampledSignal,
    constant_signal,
    cumulative,
    validate,
)
from .simulate import Trajectory, gronwall_check, integrate, picard_iterate, weak_residual
from .truncation import TruncationFunction

__version__ = "0.1.0"

__all__ = [
    "ClosedFormSignal",
    "CriterionConfig",
    "GenPEError",
    "PiecewiseConstantSignal",
    "RegressorSignal",
    "SampledSignal",
    "StabilityCertificate",
    "Trajectory",
    "TruncationFunction",
    "Verdict",
    "classical_pe",
    "constant_signal",
    "cumulative",
    "gpe_lower",
    "gpe_upper",
    "gronwall_check",
    "integrate",
    "picard_iterate",
    "simple_corollary",
    "validate",
    "weak_residual",
    "weighted_corollary",
]
