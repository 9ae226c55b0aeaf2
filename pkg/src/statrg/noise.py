"""Noise realizations, weighted noise norms and noise-bounding functions.

Randomness
----------
Replicate ``r`` of a run seeded with ``seed`` draws from
``numpy.random.default_rng(SeedSequence(seed, spawn_key=(r,)))``, i.e. the
PCG64 stream that ``SeedSequence(seed).spawn`` would hand to child ``r``.
This is a counter-style derivation: a replicate's draw depends only on
``(seed, r)``, never on how many replicates ran before it or on which
worker ran it. Standard normals come from numpy's ziggurat sampler
(``Generator.standard_normal``); bit-exactness across numpy versions is not
promised, only the distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .exceptions import ConfigError, DomainError
from .spectral import Spectrum, as_vector, effective_dimension, rho_N

__all__ = [
    "GaussianNoise",
    "PowerBoundedNoise",
    "ExplicitNoise",
    "NoiseSpec",
    "noise_from_config",
    "PowerLaw",
    "StatisticalWeight",
    "DeltaBound",
    "replicate_rng",
    "sample_zeta",
    "sample_zeta_block",
    "power_bounded_zeta",
    "weighted_noise_norm",
    "delta_bound_eval",
    "check_delta_bound",
    "in_Z_kappa",
]


@dataclass(frozen=True)
class GaussianNoise:
    seed: int


@dataclass(frozen=True, eq=False)
class PowerBoundedNoise:
    """Deterministic noise ``zeta = A**mu w`` with ``||w|| <= 1``.

    ``direction`` holds ``zeta`` itself; its admissibility is
    ``sum_j t_j**(-2 mu) zeta_j**2 <= 1``. ``direction=None`` asks the
    harness to search for a worst-case eigen-direction.
    """

    mu: float
    direction: Optional[np.ndarray] = None

    def __post_init__(self):
        if not 0.0 <= self.mu <= 0.5:
            raise DomainError(f"power-bounded noise needs 0 <= mu <= 1/2, got {self.mu}")


@dataclass(frozen=True, eq=False)
class ExplicitNoise:
    zeta: np.ndarray


NoiseSpec = Union[GaussianNoise, PowerBoundedNoise, ExplicitNoise]


def noise_from_config(cfg) -> NoiseSpec:
    kind = cfg["kind"]
    if kind == "gaussian":
        return GaussianNoise(int(cfg["seed"]))
    if kind == "power":
        return PowerBoundedNoise(float(cfg["mu"]), None)
    if kind == "explicit":
        return ExplicitNoise(np.asarray(cfg["zeta"], dtype=float))
    raise ConfigError(f"unknown noise kind {kind!r}")


def replicate_rng(seed: int, replicate_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(replicate_index),)))


def sample_zeta(spectrum: Spectrum, seed: int, replicate_index: int) -> np.ndarray:
    """One draw of ``zeta = T* xi``: independent ``N(0, t_j)`` coefficients."""
    rng = replicate_rng(seed, replicate_index)
    return np.sqrt(spectrum.t) * rng.standard_normal(spectrum.J)


def sample_zeta_block(spectrum: Spectrum, seed: int, indices) -> np.ndarray:
    """Rows ``sample_zeta(spectrum, seed, r)`` for each ``r`` in ``indices``."""
    return np.stack([sample_zeta(spectrum, seed, r) for r in indices]) if len(indices) else np.empty((0, spectrum.J))


def power_bounded_zeta(spectrum: Spectrum, mu: float, w) -> np.ndarray:
    """``A**mu w``, rescaled if needed so that ``||A**(-mu) zeta|| <= 1``."""
    if not 0.0 <= mu <= 0.5:
        raise DomainError(f"power-bounded noise needs 0 <= mu <= 1/2, got {mu}")
    w = as_vector(spectrum, w)
    nw = np.linalg.norm(w)
    if nw > 1.0:
        w = w / nw
    return spectrum.t ** mu * w


def weighted_noise_norm(spectrum: Spectrum, zeta, alpha):
    """``||s_alpha(A)**(1/2) zeta||`` with ``s_alpha(t) = alpha / (t + alpha)``.

    ``zeta`` may be a stack of rows and ``alpha`` an array; the result has
    shape ``zeta.shape[:-1] + alpha.shape``.
    """
    zeta = as_vector(spectrum, zeta)
    alpha = np.asarray(alpha, dtype=float)
    if np.any(~(alpha > 0)):
        raise DomainError("alpha must be positive")
    s = alpha.reshape(-1, 1) / (spectrum.t + alpha.reshape(-1, 1))  # (K, J)
    sq = (zeta**2) @ s.T  # (..., K)
    out = np.sqrt(sq).reshape(zeta.shape[:-1] + alpha.shape)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PowerLaw:
    """``delta(alpha) = delta * alpha**mu`` for ``0 <= mu <= 1/2``."""

    delta: float
    mu: float

    def __post_init__(self):
        if not self.delta > 0:
            raise DomainError(f"delta must be positive, got {self.delta}")
        if not 0.0 <= self.mu <= 0.5:
            raise DomainError(f"PowerLaw needs 0 <= mu <= 1/2, got {self.mu}")

    def __call__(self, alpha):
        return self.delta * np.asarray(alpha, dtype=float) ** self.mu


@dataclass(frozen=True, eq=False)
class StatisticalWeight:
    """``delta(alpha) = (1 + kappa) delta / rho_N(alpha)``; ``rho_N`` values are cached."""

    delta: float
    kappa: float
    spectrum: Spectrum
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not self.delta > 0:
            raise DomainError(f"delta must be positive, got {self.delta}")
        if self.kappa < 0:
            raise DomainError(f"kappa must be non-negative, got {self.kappa}")

    def _inv_rho(self, a: float) -> float:
        v = self._cache.get(a)
        if v is None:
            v = math.sqrt(a * effective_dimension(self.spectrum, a))
            self._cache[a] = v
        return v

    def __call__(self, alpha):
        arr = np.asarray(alpha, dtype=float)
        vals = np.array([self._inv_rho(float(a)) for a in arr.ravel()]).reshape(arr.shape)
        return (1.0 + self.kappa) * self.delta * vals


DeltaBound = Union[PowerLaw, StatisticalWeight]


def delta_bound_eval(bound: DeltaBound, spectrum: Spectrum, alpha):
    if not np.all(np.asarray(alpha) > 0):
        raise DomainError("alpha must be positive")
    if isinstance(bound, StatisticalWeight) and bound.spectrum is not spectrum:
        out = (1.0 + bound.kappa) * bound.delta / rho_N(spectrum, alpha)
    else:
        out = bound(alpha)
    return float(out) if np.ndim(out) == 0 else out


def check_delta_bound(bound: DeltaBound, alphas, rtol: float = 1e-12) -> bool:
    """``delta(alpha)`` non-decreasing and ``delta(alpha)/sqrt(alpha)`` non-increasing on ``alphas``."""
    a = np.sort(np.asarray(alphas, dtype=float))
    d = np.asarray(bound(a), dtype=float)
    w = d / np.sqrt(a)
    return bool(np.all(d[1:] >= d[:-1] * (1 - rtol)) and np.all(w[1:] <= w[:-1] * (1 + rtol)))


def in_Z_kappa(spectrum: Spectrum, zeta, kappa: float, grid, alpha_hat: float):
    """Membership of ``zeta`` in the good-noise event along the grid down to ``alpha_hat``.

    Returns ``(flag, margin)`` where ``flag`` is true iff
    ``||s_alpha^{1/2} zeta|| <= (1 + kappa) / rho_N(alpha)`` at every grid
    ``alpha >= alpha_hat`` and ``margin`` is the largest
    ``||s_alpha^{1/2} zeta|| rho_N(alpha) - (1 + kappa)`` over those points.
    ``grid`` is a :class:`~statrg.rules.Grid` or an array of grid values.
    """
    values = np.asarray(getattr(grid, "values", grid), dtype=float)
    alphas = values[values >= alpha_hat * (1 - 1e-12)]
    if alphas.size == 0:
        raise DomainError("alpha_hat lies above every grid value")
    norms = np.atleast_1d(weighted_noise_norm(spectrum, zeta, alphas))
    inv_rho = np.sqrt(alphas * effective_dimension(spectrum, alphas))
    flag = bool(np.all(norms <= (1.0 + kappa) * inv_rho))
    margin = float(np.max(norms / inv_rho - (1.0 + kappa)))
    return flag, margin
