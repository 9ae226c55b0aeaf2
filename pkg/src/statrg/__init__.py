"""Raus--Gfrerer parameter choice for statistical linear inverse problems
in sequence space, with Monte Carlo checks of its oracle bounds."""

__version__ = "0.1.0"

from .exceptions import (  # noqa: E402
    AdmissionError,
    ConfigError,
    DomainError,
    ExhaustionError,
    PairingError,
    RangeError,
    StatRGError,
)
from .spectral import (  # noqa: E402
    ProblemInstance,
    Spectrum,
    bias_norm,
    effective_dimension,
    invert_theta,
    projector_norm_sq,
    reconstruct,
    rho_N,
    spectral_apply,
    theta_rho_N,
)
from .schemes import Scheme, filter_g, qualification_constant, residual_r, verify_axioms  # noqa: E402
from .rules import (  # noqa: E402
    Grid,
    RuleConfig,
    SelectionResult,
    StopKind,
    alpha_hat_deterministic,
    alpha_hat_statistical,
    kappa_auto,
    select_deterministic_rg,
    select_statistical_rg,
    weighted_misfit,
)
