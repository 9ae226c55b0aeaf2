"""JSON experiment configuration: loading, schema validation and object builders.

Every file carries ``"schema_version": 1``; unknown keys are rejected.
"""

from __future__ import annotations

import json
from importlib import resources
from typing import Optional

import jsonschema
import numpy as np

from .exceptions import ConfigError, StatRGError
from .harness import DetRule, ExperimentConfig, power_solution, source_solution
from .rules import Grid, RuleConfig
from .schemes import Scheme
from .selfsim import KnConfig
from .spectral import ProblemInstance, Spectrum

__all__ = [
    "SCHEMA_VERSION",
    "load_schema",
    "validate_config",
    "load_config",
    "build_spectrum",
    "build_solution",
    "build_x0",
    "build_scheme",
    "build_grid",
    "build_rule",
    "build_det_rule",
    "build_kn",
    "build_instance",
    "build_experiment",
    "require",
]

SCHEMA_VERSION = 1


def load_schema() -> dict:
    text = resources.files("statrg").joinpath("schema/config.schema.json").read_text()
    return json.loads(text)


def _field_path(err: jsonschema.ValidationError) -> str:
    return "/".join(str(p) for p in err.absolute_path) or "<root>"


def validate_config(cfg: dict, source: str = "<config>") -> dict:
    """Validate against the shipped schema; raise :class:`ConfigError` naming the field."""
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = list(validator.iter_errors(cfg))
    if errors:
        # oneOf failures read better through their closest sub-error
        best = jsonschema.exceptions.best_match(errors)
        raise ConfigError(f"{source}: field {_field_path(best)!r}: {best.message}")
    return cfg


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc})") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return validate_config(cfg, str(path))


def require(cfg: dict, *keys: str) -> None:
    missing = [k for k in keys if k not in cfg]
    if missing:
        raise ConfigError(f"missing required field(s) for this subcommand: {', '.join(missing)}")


def _wrap(fn, what):
    try:
        return fn()
    except ConfigError:
        raise
    except StatRGError as exc:
        raise ConfigError(f"field {what!r}: {exc}") from None


def build_spectrum(cfg: dict) -> Spectrum:
    require(cfg, "spectrum")
    return _wrap(lambda: Spectrum.from_config(cfg["spectrum"]), "spectrum")


def build_solution(cfg: dict, spectrum: Spectrum) -> np.ndarray:
    require(cfg, "solution")
    sol = cfg["solution"]
    kind = sol["kind"]
    if kind == "power":
        return power_solution(spectrum, float(sol["p"]), float(sol.get("scale", 1.0)))
    if kind == "source":
        return source_solution(spectrum, float(sol["nu"]), float(sol.get("eps", 0.05)), float(sol.get("radius", 1.0)))
    x = np.asarray(sol["coefficients"], dtype=float)
    if x.size != spectrum.J:
        raise ConfigError(f"field 'solution/coefficients': length {x.size} does not match J={spectrum.J}")
    return x


def build_x0(cfg: dict, spectrum: Spectrum) -> np.ndarray:
    x0 = cfg.get("x0", "zero")
    if x0 == "zero":
        return np.zeros(spectrum.J)
    x0 = np.asarray(x0, dtype=float)
    if x0.size != spectrum.J:
        raise ConfigError(f"field 'x0': length {x0.size} does not match J={spectrum.J}")
    return x0


def build_scheme(cfg: dict) -> Scheme:
    require(cfg, "scheme")
    return _wrap(lambda: Scheme.from_config(cfg["scheme"]), "scheme")


def build_grid(cfg: dict, spectrum: Spectrum) -> Grid:
    rule = cfg.get("rule", {})
    a0 = rule.get("alpha0", "norm")
    a0 = spectrum.norm if a0 == "norm" else float(a0)
    return _wrap(lambda: Grid(a0, float(rule.get("q", 0.7)), int(rule.get("k_max", 200))), "rule")


def build_rule(cfg: dict) -> RuleConfig:
    require(cfg, "rule")
    r = cfg["rule"]
    return _wrap(lambda: RuleConfig(float(r["tau"]), float(r["eta"]), r.get("kappa", "auto")), "rule")


def build_det_rule(cfg: dict) -> DetRule:
    require(cfg, "rule")
    r = cfg["rule"]
    a0 = r.get("alpha0", "norm")
    return DetRule(float(r["tau"]), float(r["eta"]), float(r.get("q", 0.7)), int(r.get("k_max", 200)),
                   None if a0 == "norm" else float(a0))


def build_kn(cfg: dict) -> Optional[KnConfig]:
    if "kn" not in cfg:
        return None
    return _wrap(lambda: KnConfig.from_config(cfg["kn"]), "kn")


def build_instance(cfg: dict, delta: Optional[float] = None) -> ProblemInstance:
    spectrum = build_spectrum(cfg)
    x = build_solution(cfg, spectrum)
    x0 = build_x0(cfg, spectrum)
    if delta is None:
        require(cfg, "delta")
        delta = float(cfg["delta"])
    return _wrap(lambda: ProblemInstance(spectrum, x, x0, delta), "delta")


def build_experiment(cfg: dict, seed: Optional[int] = None) -> ExperimentConfig:
    """Statistical Monte Carlo configuration; ``seed`` overrides the file."""
    require(cfg, "spectrum", "solution", "scheme", "rule", "delta_ladder", "replicates")
    spectrum = build_spectrum(cfg)
    rule = cfg["rule"]
    a0 = rule.get("alpha0", "norm")
    kwargs = dict(
        spectrum=spectrum,
        x_dag=build_solution(cfg, spectrum),
        x0=build_x0(cfg, spectrum),
        scheme=build_scheme(cfg),
        rule=build_rule(cfg),
        q=float(rule.get("q", 0.7)),
        alpha0=None if a0 == "norm" else float(a0),
        k_max=int(rule.get("k_max", 200)),
        delta_ladder=[float(d) for d in cfg["delta_ladder"]],
        replicates=int(cfg["replicates"]),
        seed=int(cfg.get("seed", 0) if seed is None else seed),
        nu=float(cfg["source"]["nu"]) if "source" in cfg else None,
        kn=build_kn(cfg),
        echo={**cfg, **({} if seed is None else {"seed": seed})},
    )
    if "workers" in cfg:
        kwargs["workers"] = int(cfg["workers"])
    return _wrap(lambda: ExperimentConfig(**kwargs), "delta_ladder")
