"""Sequence-space representation of the symmetrized problem.

The operator ``A = T*T`` is diagonal in its eigenbasis, so every element of
``X`` is a coefficient array paired with a :class:`Spectrum`, and every
spectral function ``f(A)`` acts coefficientwise::

    (f(A) v)_j = f(t_j) v_j

The data model is ``z = A x_dag + delta * zeta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .exceptions import DomainError, PairingError, RangeError

__all__ = [
    "Spectrum",
    "ProblemInstance",
    "as_vector",
    "effective_dimension",
    "rho_N",
    "theta_rho_N",
    "invert_increasing",
    "invert_theta",
    "spectral_apply",
    "projector_norm_sq",
    "reconstruct",
    "bias_norm",
]


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Finite, non-increasing list of positive eigenvalues of ``A``.

    Repeated eigenvalues are allowed and treated as distinct indices.
    """

    eigenvalues: np.ndarray

    def __post_init__(self):
        t = np.array(self.eigenvalues, dtype=float).ravel()
        if t.size == 0:
            raise DomainError("spectrum must contain at least one eigenvalue")
        if not np.all(np.isfinite(t)) or np.any(t <= 0):
            raise DomainError("eigenvalues must be finite and strictly positive")
        if np.any(np.diff(t) > 0):
            raise DomainError("eigenvalues must be in non-increasing order")
        t.setflags(write=False)
        object.__setattr__(self, "eigenvalues", t)
        object.__setattr__(self, "trace", math.fsum(t))

    @classmethod
    def power(cls, a: float, J: int) -> "Spectrum":
        """``t_j = j**(-2a)`` for ``j = 1..J``; ``a > 1/2`` keeps the trace finite."""
        if a <= 0.5:
            raise DomainError(f"power spectrum needs a > 1/2, got a={a}")
        if J < 1:
            raise DomainError(f"J must be >= 1, got {J}")
        j = np.arange(1, J + 1, dtype=float)
        return cls(j ** (-2.0 * a))

    @classmethod
    def from_config(cls, cfg) -> "Spectrum":
        if isinstance(cfg, (list, tuple)):
            return cls(np.asarray(cfg, dtype=float))
        kind = cfg.get("kind", "explicit")
        if kind == "power":
            return cls.power(float(cfg["a"]), int(cfg["J"]))
        return cls(np.asarray(cfg["eigenvalues"], dtype=float))

    @property
    def t(self) -> np.ndarray:
        return self.eigenvalues

    @property
    def J(self) -> int:
        return self.eigenvalues.size

    @property
    def norm(self) -> float:
        """Operator norm ``||A|| = t_1``."""
        return float(self.eigenvalues[0])

    def __len__(self):
        return self.J

    def __repr__(self):
        return f"Spectrum(J={self.J}, t1={self.norm:.6g}, tJ={self.eigenvalues[-1]:.6g})"


def as_vector(spectrum: Spectrum, v) -> np.ndarray:
    """Coerce ``v`` to a float coefficient array paired with ``spectrum``."""
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 0:
        arr = np.full(spectrum.J, float(arr))
    if arr.shape[-1] != spectrum.J:
        raise PairingError(f"vector of length {arr.shape[-1]} paired with spectrum of J={spectrum.J}")
    return arr


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    spectrum: Spectrum
    x_dag: np.ndarray
    x0: np.ndarray
    delta: float

    def __post_init__(self):
        object.__setattr__(self, "x_dag", as_vector(self.spectrum, self.x_dag))
        object.__setattr__(self, "x0", as_vector(self.spectrum, self.x0))
        if not self.delta > 0:
            raise DomainError(f"noise level must be positive, got {self.delta}")

    def with_delta(self, delta: float) -> "ProblemInstance":
        return ProblemInstance(self.spectrum, self.x_dag, self.x0, delta)

    @property
    def v(self) -> np.ndarray:
        """``x_dag - x0``."""
        return self.x_dag - self.x0

    def exact_data(self) -> np.ndarray:
        return self.spectrum.t * self.x_dag

    def data(self, zeta) -> np.ndarray:
        """Noisy symmetrized data ``z = A x_dag + delta * zeta``."""
        return self.exact_data() + self.delta * as_vector(self.spectrum, zeta)


def _positive(x, name):
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError(f"{name} must be positive, got {x}")
    return arr


def _scalar_or_array(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def effective_dimension(spectrum: Spectrum, lam):
    """``N(lam) = sum_j t_j / (t_j + lam)``; accepts a scalar or an array of ``lam``."""
    lam = _positive(lam, "lambda")
    t = spectrum.t
    vals = (t / (t + lam[..., None])).sum(axis=-1)
    return _scalar_or_array(vals)


def rho_N(spectrum: Spectrum, t):
    """``1 / sqrt(t N(t))``."""
    t = _positive(t, "t")
    return _scalar_or_array(1.0 / np.sqrt(t * effective_dimension(spectrum, t)))


def theta_rho_N(spectrum: Spectrum, t):
    """``t * rho_N(t) = sqrt(t / N(t))``; continuous and strictly increasing."""
    t = _positive(t, "t")
    return _scalar_or_array(np.sqrt(t / effective_dimension(spectrum, t)))


def invert_increasing(func: Callable[[float], float], target: float, bracket: Sequence[float],
                      rtol: float = 1e-10, max_iter: int = 400) -> float:
    """Bisection (geometric midpoints) for a strictly increasing positive function.

    Returns ``t`` with ``|func(t) - target| <= rtol * target``. Raises
    :class:`RangeError` when ``target`` is outside ``[func(lo), func(hi)]``.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not 0 < lo < hi:
        raise DomainError(f"bracket must satisfy 0 < lo < hi, got {bracket}")
    f_lo, f_hi = func(lo), func(hi)
    if not f_lo <= target <= f_hi:
        raise RangeError(f"target {target!r} outside [{f_lo!r}, {f_hi!r}] on bracket [{lo}, {hi}]")
    if abs(f_lo - target) <= rtol * target:
        return lo
    if abs(f_hi - target) <= rtol * target:
        return hi
    for _ in range(max_iter):
        mid = math.sqrt(lo * hi)
        f_mid = func(mid)
        if abs(f_mid - target) <= rtol * target:
            return mid
        if f_mid < target:
            lo = mid
        else:
            hi = mid
        if hi / lo - 1.0 < 1e-15:
            break
    return math.sqrt(lo * hi)


def invert_theta(spectrum: Spectrum, target: float, bracket: Sequence[float] = (1e-30, 1e6),
                 rtol: float = 1e-10, nu: float = 0.0) -> float:
    """Solve ``Theta(t) * t**nu = target`` for ``t`` by monotone bisection.

    ``nu = 0`` inverts ``Theta_{rho_N}`` itself; ``nu > 0`` inverts the
    companion ``Theta_{rho_N psi}`` for the power index function ``psi(t) = t**nu``.
    """
    if not target > 0:
        raise DomainError(f"target must be positive, got {target}")
    return invert_increasing(lambda s: theta_rho_N(spectrum, s) * s ** nu, target, bracket, rtol)


def spectral_apply(f: Callable, spectrum: Spectrum, v) -> np.ndarray:
    """``(f(t_j) v_j)_j``."""
    v = as_vector(spectrum, v)
    return np.broadcast_to(np.asarray(f(spectrum.t), dtype=float), v.shape) * v


def projector_norm_sq(spectrum: Spectrum, v, alpha: float) -> float:
    """``||E_alpha v||^2``, the mass of ``v`` on eigenvalues ``t_j <= alpha``."""
    v = as_vector(spectrum, v)
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    return math.fsum(v[spectrum.t <= alpha] ** 2)


def reconstruct(instance: ProblemInstance, scheme, alpha: float, z_delta) -> np.ndarray:
    """``x0 - g_alpha(A)(A x0 - z)`` coefficientwise."""
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    t = instance.spectrum.t
    z = as_vector(instance.spectrum, z_delta)
    x0 = instance.x0
    return x0 - scheme.filter(alpha, t) * (t * x0 - z)


def bias_norm(instance: ProblemInstance, scheme, alpha) -> float:
    """``||r_alpha(A)(x_dag - x0)||``, the noise-free error ``||x_dag - x_alpha||``.

    ``alpha`` may be an array, in which case an array of norms is returned.
    """
    alpha = _positive(alpha, "alpha")
    r = scheme.residual(alpha[..., None], instance.spectrum.t)
    return _scalar_or_array(np.linalg.norm(r * instance.v, axis=-1))
