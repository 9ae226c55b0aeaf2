"""Raus--Gfrerer parameter choice on a geometric grid.

Two rules scan ``alpha_k = alpha0 * q**k`` for ``k = 0, 1, ...`` and return
the first (hence largest) admissible grid value:

* the statistical rule stops at the first ``alpha`` with either the regular
  condition ``||s_a r_a (A x0 - z)|| <= tau (1+kappa) delta / rho_N(a)`` or
  the emergency condition ``Theta(a) <= eta (1+kappa) delta``;
* the deterministic rule, for a noise-bounding function ``delta(alpha)``,
  stops at the first ``alpha >= alpha_hat`` with
  ``||s_a r_a (A x0 - z)|| <= tau delta(a)`` and falls back to ``alpha_hat``.

All threshold comparisons are closed (``<=``).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Union

import numpy as np

from .exceptions import ConfigError, DomainError, ExhaustionError
from .noise import DeltaBound
from .spectral import (
    ProblemInstance,
    Spectrum,
    as_vector,
    bias_norm,
    effective_dimension,
    reconstruct,
    theta_rho_N,
)

__all__ = [
    "Grid",
    "RuleConfig",
    "StopKind",
    "TraceRow",
    "SelectionResult",
    "kappa_auto",
    "weighted_misfit",
    "alpha_hat_statistical",
    "alpha_hat_deterministic",
    "select_statistical_rg",
    "select_deterministic_rg",
    "oracle_alpha",
    "oracle_rhs_statistical",
    "oracle_rhs_deterministic",
    "log_factor",
]


@dataclass(frozen=True)
class Grid:
    alpha0: float
    q: float
    k_max: int

    def __post_init__(self):
        if not self.alpha0 > 0:
            raise ConfigError(f"alpha0 must be positive, got {self.alpha0}")
        if not 0 < self.q < 1:
            raise ConfigError(f"q must lie in (0, 1), got {self.q}")
        if int(self.k_max) != self.k_max or self.k_max < 1:
            raise ConfigError(f"k_max must be an integer >= 1, got {self.k_max}")

    def __getitem__(self, k: int) -> float:
        return self.alpha0 * self.q**k

    def __len__(self):
        return self.k_max + 1

    @property
    def values(self) -> np.ndarray:
        return self.alpha0 * self.q ** np.arange(self.k_max + 1)

    def index(self, alpha: float) -> int:
        k = int(round(math.log(alpha / self.alpha0) / math.log(self.q)))
        if not math.isclose(self[k], alpha, rel_tol=1e-9):
            raise DomainError(f"{alpha} is not a grid value")
        return k

    def refined(self, alpha_min: float) -> np.ndarray:
        """Grid with ratio ``q**(1/4)`` from ``alpha0`` down to ``alpha_min``."""
        r = self.q**0.25
        n = int(math.floor(math.log(alpha_min / self.alpha0) / math.log(r) + 1e-9))
        return self.alpha0 * r ** np.arange(max(n, 0) + 1)


@dataclass(frozen=True)
class RuleConfig:
    tau: float
    eta: float
    kappa: Union[float, str] = "auto"

    def __post_init__(self):
        if not self.tau > 1:
            raise ConfigError(f"tau must exceed 1, got {self.tau}")
        if not self.eta > 0:
            raise ConfigError(f"eta must be positive, got {self.eta}")
        if self.kappa != "auto" and not float(self.kappa) >= 0:
            raise ConfigError(f"kappa must be 'auto' or >= 0, got {self.kappa}")

    def resolve_kappa(self, delta: float, spectrum: Spectrum, alpha0: float) -> float:
        if self.kappa == "auto":
            return kappa_auto(delta, effective_dimension(spectrum, alpha0))
        return float(self.kappa)


class StopKind(str, enum.Enum):
    REGULAR = "Regular"
    EMERGENCY = "Emergency"
    EXHAUSTED = "Exhausted"


class TraceRow(NamedTuple):
    alpha: float
    misfit: float
    regular_threshold: float
    emergency_lhs: float
    emergency_rhs: float


@dataclass(frozen=True)
class SelectionResult:
    alpha_selected: float
    stop_kind: StopKind
    steps: int
    trace: List[TraceRow] = field(repr=False)
    index: int = 0
    kappa: Optional[float] = None
    alpha_hat: Optional[float] = None


def log_factor(delta: float) -> float:
    """``|log(1/delta)|``."""
    return abs(math.log(1.0 / delta))


def kappa_auto(delta: float, n_alpha0: float) -> float:
    """``sqrt(8 |log(1/delta)| / N(alpha0))``."""
    if not delta > 0:
        raise DomainError(f"delta must be positive, got {delta}")
    if not n_alpha0 > 0:
        raise DomainError(f"N(alpha0) must be positive, got {n_alpha0}")
    return math.sqrt(8.0 * log_factor(delta) / n_alpha0)


def _misfit_vec(instance: ProblemInstance, scheme, alpha, z):
    t = instance.spectrum.t
    s = alpha / (t + alpha)
    return s * scheme.residual(alpha, t) * (t * instance.x0 - z)


def weighted_misfit(instance: ProblemInstance, scheme, alpha: float, z_delta) -> float:
    """``||s_alpha(A) r_alpha(A)(A x0 - z)||``, equal to ``||s_alpha(A)(A x_alpha - z)||``."""
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    z = as_vector(instance.spectrum, z_delta)
    return float(np.linalg.norm(_misfit_vec(instance, scheme, alpha, z)))


def weighted_misfit_direct(instance: ProblemInstance, scheme, alpha: float, z_delta) -> float:
    """Same quantity evaluated through the reconstruction."""
    t = instance.spectrum.t
    z = as_vector(instance.spectrum, z_delta)
    x = reconstruct(instance, scheme, alpha, z)
    return float(np.linalg.norm(alpha / (t + alpha) * (t * x - z)))


def _alpha_hat_index(cond, grid: Grid, what: str) -> int:
    for k in range(grid.k_max + 1):
        if cond(grid[k]):
            return k
    raise ExhaustionError(f"{what} never satisfied on {len(grid)} grid points; increase k_max")


def alpha_hat_statistical(spectrum: Spectrum, grid: Grid, eta: float, kappa: float, delta: float) -> float:
    """Largest grid ``alpha`` with ``Theta(alpha) <= eta (1 + kappa) delta``."""
    rhs = eta * (1.0 + kappa) * delta
    k = _alpha_hat_index(lambda a: theta_rho_N(spectrum, a) <= rhs, grid, "emergency condition")
    return grid[k]


def alpha_hat_deterministic(grid: Grid, bound: DeltaBound, eta: float) -> float:
    """Largest grid ``alpha`` with ``alpha <= eta delta(alpha)``."""
    k = _alpha_hat_index(lambda a: a <= eta * float(bound(a)), grid, "alpha <= eta delta(alpha)")
    return grid[k]


def select_statistical_rg(instance: ProblemInstance, scheme, grid: Grid, config: RuleConfig,
                          z_delta, kappa: Optional[float] = None) -> SelectionResult:
    spectrum = instance.spectrum
    delta = instance.delta
    if kappa is None:
        kappa = config.resolve_kappa(delta, spectrum, grid.alpha0)
    z = as_vector(spectrum, z_delta)
    emergency_rhs = config.eta * (1.0 + kappa) * delta
    trace = []
    for k in range(grid.k_max + 1):
        a = grid[k]
        n_a = effective_dimension(spectrum, a)
        misfit = weighted_misfit(instance, scheme, a, z)
        reg_thr = config.tau * (1.0 + kappa) * delta * math.sqrt(a * n_a)
        theta = math.sqrt(a / n_a)
        trace.append(TraceRow(a, misfit, reg_thr, theta, emergency_rhs))
        if misfit <= reg_thr:
            return SelectionResult(a, StopKind.REGULAR, k + 1, trace, k, kappa)
        if theta <= emergency_rhs:
            return SelectionResult(a, StopKind.EMERGENCY, k + 1, trace, k, kappa, a)
    return SelectionResult(grid[grid.k_max], StopKind.EXHAUSTED, len(trace), trace, grid.k_max, kappa)


def select_deterministic_rg(instance: ProblemInstance, scheme, grid: Grid, tau: float,
                            bound: DeltaBound, alpha_hat: float, z_delta) -> SelectionResult:
    """Largest grid ``alpha >= alpha_hat`` passing the misfit test, else ``alpha_hat``.

    Trace rows carry ``(alpha, alpha_hat)`` in the emergency columns.
    """
    if not tau > 1:
        raise ConfigError(f"tau must exceed 1, got {tau}")
    k_hat = grid.index(alpha_hat)
    z = as_vector(instance.spectrum, z_delta)
    trace = []
    for k in range(k_hat + 1):
        a = grid[k]
        misfit = weighted_misfit(instance, scheme, a, z)
        thr = tau * float(bound(a))
        trace.append(TraceRow(a, misfit, thr, a, grid[k_hat]))
        if misfit <= thr:
            return SelectionResult(a, StopKind.REGULAR, k + 1, trace, k, None, grid[k_hat])
    return SelectionResult(grid[k_hat], StopKind.EMERGENCY, k_hat + 1, trace, k_hat, None, grid[k_hat])


def oracle_alpha(instance: ProblemInstance, scheme, grid_values, z_delta=None):
    """Grid minimizer of ``||x_dag - x_alpha^delta||`` (noise-free when ``z_delta`` is None).

    Ties go to the largest ``alpha``. Returns ``(alpha, value)``.
    """
    vals = np.sort(np.asarray(grid_values, dtype=float))[::-1]
    if z_delta is None:
        errs = np.atleast_1d(bias_norm(instance, scheme, vals))
    else:
        errs = np.array([np.linalg.norm(instance.x_dag - reconstruct(instance, scheme, a, z_delta)) for a in vals])
    i = int(np.argmin(errs))
    return float(vals[i]), float(errs[i])


def oracle_rhs_statistical(instance: ProblemInstance, scheme, alpha):
    """``||x_alpha - x_dag|| + delta (1 + sqrt|log(1/delta)|) / Theta(alpha)``."""
    delta = instance.delta
    noise = delta * (1.0 + math.sqrt(log_factor(delta))) / np.asarray(theta_rho_N(instance.spectrum, alpha))
    out = bias_norm(instance, scheme, alpha) + noise
    return float(out) if np.ndim(out) == 0 else out


def oracle_rhs_deterministic(instance: ProblemInstance, scheme, bound: DeltaBound, alpha):
    """``||x_alpha - x_dag|| + delta(alpha) / alpha``."""
    a = np.asarray(alpha, dtype=float)
    out = bias_norm(instance, scheme, a) + np.asarray(bound(a)) / a
    return float(out) if np.ndim(out) == 0 else out
