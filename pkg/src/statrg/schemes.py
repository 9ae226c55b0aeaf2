"""Linear regularization filters ``g_alpha`` and their residuals ``r_alpha = 1 - t g_alpha``.

Five families are supported:

==================  =========================  ==========
name                residual ``r_alpha(t)``    ``gamma*``
==================  =========================  ==========
tikhonov            ``a / (t + a)``            1
iterated-tikhonov   ``(a / (t + a))**n``       n
tsvd                ``0 if t >= a else 1``     1
landweber           ``(1 - t)**floor(1/a)``    1
showalter           ``exp(-t / a)``            1
==================  =========================  ==========

Landweber needs ``t <= 1`` and ``alpha <= 1`` (so that at least one step is
taken). Filter values at ``t = 0`` are the analytic limits.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import ConfigError, DomainError

__all__ = [
    "SCHEME_NAMES",
    "Scheme",
    "AxiomReport",
    "residual_r",
    "filter_g",
    "verify_axioms",
    "qualification_constant",
    "QUALIFICATION_CAP",
    "AXIOM_TOL",
]

SCHEME_NAMES = ("tikhonov", "iterated-tikhonov", "tsvd", "landweber", "showalter")
AXIOM_TOL = 1e-12
# Empirical qualification constants above this are read as saturation.
QUALIFICATION_CAP = 10.0


@dataclass(frozen=True)
class Scheme:
    name: str
    n: int = 1

    def __post_init__(self):
        if self.name not in SCHEME_NAMES:
            raise ConfigError(f"unknown scheme {self.name!r}; expected one of {SCHEME_NAMES}")
        if self.name == "iterated-tikhonov":
            if int(self.n) != self.n or self.n < 1:
                raise ConfigError(f"iterated-tikhonov needs integer n >= 1, got {self.n}")
        elif self.n != 1:
            raise ConfigError(f"scheme {self.name!r} takes no 'n'")

    @classmethod
    def from_config(cls, cfg) -> "Scheme":
        if isinstance(cfg, str):
            return cls(cfg)
        return cls(cfg["name"], int(cfg.get("n", 1)))

    def to_config(self):
        if self.name == "iterated-tikhonov":
            return {"name": self.name, "n": self.n}
        return {"name": self.name}

    @property
    def label(self) -> str:
        return f"iterated-tikhonov(n={self.n})" if self.name == "iterated-tikhonov" else self.name

    @property
    def gamma_star(self) -> float:
        """Analytic bound on ``sup_t alpha |g_alpha(t)|``."""
        return float(self.n) if self.name == "iterated-tikhonov" else 1.0

    def _check(self, alpha, t):
        alpha = np.asarray(alpha, dtype=float)
        t = np.asarray(t, dtype=float)
        if np.any(~(alpha > 0)):
            raise DomainError("alpha must be positive")
        if np.any(t < 0):
            raise DomainError("t must be non-negative")
        if self.name == "landweber":
            if np.any(t > 1):
                raise DomainError("landweber needs t <= 1 (||A|| <= 1)")
            if np.any(alpha > 1):
                raise DomainError("landweber needs alpha <= 1 so that floor(1/alpha) >= 1")
        return alpha, t

    def steps(self, alpha):
        """Landweber iteration count ``floor(1/alpha)``."""
        return np.floor(1.0 / np.asarray(alpha, dtype=float))

    def residual(self, alpha, t):
        alpha, t = self._check(alpha, t)
        if self.name == "tikhonov":
            r = alpha / (t + alpha)
        elif self.name == "iterated-tikhonov":
            r = (alpha / (t + alpha)) ** self.n
        elif self.name == "tsvd":
            r = np.where(t >= alpha, 0.0, 1.0)
        elif self.name == "landweber":
            with np.errstate(divide="ignore"):
                r = np.exp(self.steps(alpha) * np.log1p(-t))
        else:
            r = np.exp(-t / alpha)
        return r if r.ndim else float(r)

    def filter(self, alpha, t):
        alpha, t = self._check(alpha, t)
        alpha, t = np.broadcast_arrays(alpha, t)
        pos = t > 0
        ts = np.where(pos, t, 1.0)
        if self.name == "tikhonov":
            g = 1.0 / (t + alpha)
        elif self.name == "iterated-tikhonov":
            # 1 - (a/(t+a))**n, accurate for t << a
            one_minus_r = -np.expm1(-self.n * np.log1p(ts / alpha))
            g = np.where(pos, one_minus_r / ts, self.n / alpha)
        elif self.name == "tsvd":
            g = np.where(t >= alpha, 1.0 / ts, 0.0)
        elif self.name == "landweber":
            m = self.steps(alpha)
            with np.errstate(divide="ignore"):
                one_minus_r = -np.expm1(m * np.log1p(-ts))
            g = np.where(pos, one_minus_r / ts, m)
        else:
            g = np.where(pos, -np.expm1(-ts / alpha) / ts, 1.0 / alpha)
        return g if g.ndim else float(g)


def residual_r(scheme: Scheme, alpha, t):
    return scheme.residual(alpha, t)


def filter_g(scheme: Scheme, alpha, t):
    return scheme.filter(alpha, t)


@dataclass
class AxiomReport:
    gamma1: float
    gamma_star: float
    monotone_ok: bool
    range_ok: bool
    lem23_ok: bool
    gamma_ok: bool
    identity_ok: bool
    worst_violation: float
    witness: Optional[tuple]
    tolerance: float = AXIOM_TOL

    @property
    def passed(self) -> bool:
        return all((self.monotone_ok, self.range_ok, self.lem23_ok, self.gamma_ok, self.identity_ok))


def verify_axioms(scheme, t_grid, alpha_grid, tol: float = AXIOM_TOL) -> AxiomReport:
    """Check the filter axioms on every grid pair and triple.

    Checked: ``0 <= r <= 1``; ``r_alpha <= r_beta`` for ``alpha <= beta``;
    ``alpha g_alpha(t) <= gamma*``; ``r + t g = 1``; and
    ``0 <= r_beta - r_alpha <= (1 + gamma*) t / (alpha + t) r_beta``.
    Failures are reported, never raised. ``scheme`` only needs ``residual``,
    ``filter`` and ``gamma_star``.
    """
    t = np.asarray(t_grid, dtype=float)
    a = np.sort(np.asarray(alpha_grid, dtype=float))
    gstar = float(scheme.gamma_star)
    R = np.broadcast_to(scheme.residual(a[:, None], t[None, :]), (a.size, t.size))
    G = np.broadcast_to(scheme.filter(a[:, None], t[None, :]), (a.size, t.size))

    violations = {}

    def record(name, amount, witness):
        violations[name] = (float(amount), witness)

    def worst_2d(V):
        i, j = np.unravel_index(np.argmax(V), V.shape)
        return V[i, j], (float(t[j]), float(a[i]), None)

    # range
    V = np.maximum(-R, R - 1.0)
    record("range", *worst_2d(V))
    # alpha |g| <= gamma*
    AG = a[:, None] * np.abs(G)
    record("gamma", *worst_2d(AG - gstar))
    # r + t g = 1
    record("identity", *worst_2d(np.abs(R + t[None, :] * G - 1.0)))
    # monotone in alpha: running max from small alpha must not exceed r at larger alpha
    run_max = np.maximum.accumulate(R, axis=0)
    V = run_max - R
    ib, jt = np.unravel_index(np.argmax(V), V.shape)
    ia = int(np.argmax(R[: ib + 1, jt]))
    record("monotone", V[ib, jt], (float(t[jt]), float(a[ia]), float(a[ib])))
    # lem23 on all triples alpha <= beta
    D = R[None, :, :] - R[:, None, :]  # [alpha, beta, t] = r_beta - r_alpha
    bound = (1.0 + gstar) * (t[None, None, :] / (a[:, None, None] + t[None, None, :])) * R[None, :, :]
    V = np.maximum(-D, D - bound)
    upper = np.triu(np.ones((a.size, a.size), dtype=bool))  # alpha index <= beta index
    V = np.where(upper[:, :, None], V, -np.inf)
    i, k, j = np.unravel_index(np.argmax(V), V.shape)
    record("lem23", V[i, k, j], (float(t[j]), float(a[i]), float(a[k])))

    ok = {name: amount <= tol for name, (amount, _) in violations.items()}
    worst_name = max(violations, key=lambda n: violations[n][0])
    worst, witness = violations[worst_name]
    return AxiomReport(
        gamma1=float(np.max(np.abs(R))),
        gamma_star=float(np.max(AG)),
        monotone_ok=ok["monotone"],
        range_ok=ok["range"],
        lem23_ok=ok["lem23"],
        gamma_ok=ok["gamma"],
        identity_ok=ok["identity"],
        worst_violation=max(worst, 0.0),
        witness=witness if worst > tol else None,
        tolerance=tol,
    )


def qualification_constant(scheme: Scheme, nu: float, t_grid, alpha_grid) -> float:
    """Empirical ``gamma = sup r_alpha(t) t**nu / alpha**nu`` over the grid."""
    t = np.asarray(t_grid, dtype=float)
    a = np.asarray(alpha_grid, dtype=float)
    R = scheme.residual(a[:, None], t[None, :])
    return float(np.max(np.abs(R) * (t[None, :] / a[:, None]) ** nu))
