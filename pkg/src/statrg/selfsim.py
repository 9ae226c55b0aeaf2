"""Admission checks for the self-similarity condition on ``v = x_dag - x0``.

General (filter) form, for every probe ``0 < alpha <= t0``::

    sum_{t_j <= alpha} v_j**2  <=  c1**2 * sum_{t_j >= c2 alpha} r_alpha(t_j)**2 v_j**2

Projector form::

    ||E_{c2 alpha} v||  <=  theta ||E_alpha v||

Both sides only change at ``alpha = t_j`` and ``alpha = t_j / c2``, so the
default probe set adds points just below and just above every such
breakpoint inside the probe range.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .exceptions import ConfigError
from .spectral import Spectrum, as_vector

__all__ = [
    "KnConfig",
    "KnReport",
    "default_probes",
    "check_kn",
    "check_projector_form",
    "kn_sides",
    "tsvd_reduced_sides",
    "moment_form_sides",
    "kn_c1_from_projector",
]

PROBE_OFFSET = 1e-9
N_GEOMETRIC_PROBES = 20


@dataclass(frozen=True)
class KnConfig:
    c1: float
    c2: float
    t0: float
    theta: Optional[float] = None
    alpha_probe: Optional[Sequence[float]] = None

    def __post_init__(self):
        if not self.c1 > 1:
            raise ConfigError(f"c1 must exceed 1, got {self.c1}")
        if not 0 < self.c2 < 1:
            raise ConfigError(f"c2 must lie in (0, 1), got {self.c2}")
        if not self.t0 > 0:
            raise ConfigError(f"t0 must be positive, got {self.t0}")
        if self.theta is not None and not 0 < self.theta < 1:
            raise ConfigError(f"theta must lie in (0, 1), got {self.theta}")

    @classmethod
    def from_config(cls, cfg) -> "KnConfig":
        probes = cfg.get("alpha_probe")
        return cls(float(cfg["c1"]), float(cfg["c2"]), float(cfg["t0"]),
                   None if cfg.get("theta") is None else float(cfg["theta"]),
                   None if probes is None else tuple(float(a) for a in probes))


@dataclass
class KnReport:
    passed: bool
    worst_ratio: float
    witness_alpha: Optional[float]
    alphas: np.ndarray = field(repr=False)
    lhs: np.ndarray = field(repr=False)
    rhs: np.ndarray = field(repr=False)
    inconclusive: bool = False
    skipped: int = 0

    @property
    def ratios(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.lhs == 0, 0.0, self.lhs / self.rhs)

    def verdict(self) -> str:
        if self.inconclusive:
            return "INCONCLUSIVE: every probe degenerate"
        head = "PASS" if self.passed else "FAIL"
        tail = "" if self.witness_alpha is None else f" at alpha={self.witness_alpha:.17g}"
        return f"{head}: worst ratio {self.worst_ratio:.17g}{tail}"


def default_probes(spectrum: Spectrum, cfg: KnConfig) -> np.ndarray:
    if cfg.alpha_probe is not None:
        probes = np.asarray(cfg.alpha_probe, dtype=float)
        if probes.size == 0:
            raise ConfigError("empty probe list")
        if np.any(probes <= 0) or np.any(probes > cfg.t0):
            raise ConfigError(f"probes must lie in (0, t0={cfg.t0}]")
        return np.sort(probes)
    t = spectrum.t
    lo = min(t[-1], cfg.t0)
    geo = np.geomspace(lo, cfg.t0, N_GEOMETRIC_PROBES)
    breaks = np.concatenate([t, t / cfg.c2])
    breaks = breaks[(breaks >= lo) & (breaks <= cfg.t0)]
    near = np.concatenate([breaks * (1 - PROBE_OFFSET), breaks * (1 + PROBE_OFFSET)])
    probes = np.unique(np.concatenate([geo, near]))
    return probes[(probes > 0) & (probes <= cfg.t0)]


def _lower_mass(t, v2, alphas):
    # sum_{t_j <= alpha} v_j^2 for each alpha, via a sorted cumulative sum
    order = np.argsort(t)
    ts, cum = t[order], np.concatenate([[0.0], np.cumsum(v2[order])])
    return cum[np.searchsorted(ts, alphas, side="right")]


def kn_sides(spectrum: Spectrum, v, scheme, cfg: KnConfig, alphas=None):
    """``(alphas, lhs, rhs)`` of the general form, ``c1**2`` folded into ``rhs``."""
    v = as_vector(spectrum, v)
    t = spectrum.t
    alphas = default_probes(spectrum, cfg) if alphas is None else np.asarray(alphas, dtype=float)
    v2 = v**2
    lhs = _lower_mass(t, v2, alphas)
    rhs = np.empty_like(alphas)
    for start in range(0, alphas.size, 256):
        a = alphas[start:start + 256, None]
        r = scheme.residual(a, t[None, :])
        rhs[start:start + 256] = cfg.c1**2 * np.sum(np.where(t[None, :] >= cfg.c2 * a, r**2 * v2, 0.0), axis=1)
    return alphas, lhs, rhs


def _report(alphas, lhs, rhs, limit):
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(lhs == 0, 0.0, lhs / rhs)
    i = int(np.argmax(ratio))
    worst = float(ratio[i])
    passed = worst <= limit
    return KnReport(passed, worst, None if passed and worst == 0 else float(alphas[i]), alphas, lhs, rhs)


def check_kn(spectrum: Spectrum, v, scheme, cfg: KnConfig) -> KnReport:
    """General-form check; passes iff ``lhs <= rhs`` at every probe."""
    alphas, lhs, rhs = kn_sides(spectrum, v, scheme, cfg)
    return _report(alphas, lhs, rhs, 1.0)


def check_projector_form(spectrum: Spectrum, v, cfg: KnConfig) -> KnReport:
    """Projector-form check ``||E_{c2 a} v|| <= theta ||E_a v||``.

    Probes where ``||E_a v|| = 0`` are skipped; if all are skipped the
    report is inconclusive and does not pass.
    """
    if cfg.theta is None:
        raise ConfigError("projector form needs theta")
    v = as_vector(spectrum, v)
    alphas = default_probes(spectrum, cfg)
    v2 = v**2
    upper = np.sqrt(_lower_mass(spectrum.t, v2, alphas))
    lower = np.sqrt(_lower_mass(spectrum.t, v2, cfg.c2 * alphas))
    keep = upper > 0
    skipped = int(np.sum(~keep))
    if not np.any(keep):
        return KnReport(False, float("nan"), None, alphas, lower, upper, inconclusive=True, skipped=skipped)
    rep = _report(alphas[keep], lower[keep], upper[keep], cfg.theta)
    rep.skipped = skipped
    return rep


def tsvd_reduced_sides(spectrum: Spectrum, v, cfg: KnConfig, alphas):
    """``sum_{t <= a} v**2`` against ``c1**2 sum_{c2 a <= t < a} v**2``."""
    v2 = as_vector(spectrum, v) ** 2
    t = spectrum.t
    a = np.asarray(alphas, dtype=float)[:, None]
    lhs = np.sum(np.where(t[None, :] <= a, v2, 0.0), axis=1)
    band = (t[None, :] >= cfg.c2 * a) & (t[None, :] < a)
    rhs = cfg.c1**2 * np.sum(np.where(band, v2, 0.0), axis=1)
    return lhs, rhs


def moment_form_sides(spectrum: Spectrum, v, n: int, c2: float, alphas):
    """``(R, M)`` with ``R = sum_{t >= c2 a} r_a(t)**2 v**2`` for n-fold Tikhonov and
    ``M = a**(2n) sum_{t >= c2 a} t**(-2n) v**2``.

    ``c3**2 M <= R <= M`` with ``c3 = (c2 / (1 + c2))**n``.
    """
    v2 = as_vector(spectrum, v) ** 2
    t = spectrum.t[None, :]
    a = np.asarray(alphas, dtype=float)[:, None]
    tail = t >= c2 * a
    R = np.sum(np.where(tail, (a / (t + a)) ** (2 * n) * v2, 0.0), axis=1)
    M = np.sum(np.where(tail, (a / t) ** (2 * n) * v2, 0.0), axis=1)
    return R, M


def kn_c1_from_projector(scheme, theta: float) -> float:
    """A ``c1`` for which the projector form with ``theta`` implies the general form.

    Uses ``r_alpha(t) >= rmin`` on ``[c2 alpha, alpha]``: ``rmin = exp(-1)``
    for Showalter and ``1/4`` for Landweber with ``alpha <= 1/2``; then
    ``c1**2 = 1 / (rmin**2 (1 - theta**2))``.
    """
    rmin = {"showalter": np.exp(-1.0), "landweber": 0.25}.get(scheme.name)
    if rmin is None:
        raise ConfigError(f"no projector-form transfer for scheme {scheme.name!r}")
    return float(1.0 / (rmin * np.sqrt(1.0 - theta**2)))
