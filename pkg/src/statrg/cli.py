"""Command-line front end.

Exit codes: 0 success, 1 a checked property failed, 2 configuration error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import sys
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .config import (
    build_det_rule,
    build_experiment,
    build_grid,
    build_instance,
    build_kn,
    build_rule,
    build_scheme,
    build_spectrum,
    load_config,
    require,
)
from .exceptions import AdmissionError, ConfigError, ExhaustionError, StatRGError
from .harness import concentration_study, lemma_suite, rate_study, run_experiment, worst_direction_run
from .noise import PowerLaw, power_bounded_zeta, sample_zeta
from .report import atomic_write_text, export_report, format_value, table_to_csv
from .rules import alpha_hat_deterministic, select_deterministic_rg, select_statistical_rg
from .schemes import SCHEME_NAMES, Scheme, verify_axioms
from .selfsim import check_kn, check_projector_form

log = logging.getLogger("statrg")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
SUBCOMMANDS = ("axioms", "kn-check", "select", "mc", "rate", "concentration", "lemmas")


class Table:
    def __init__(self, columns: Sequence[str], rows: List[Sequence], summary: Optional[dict] = None):
        self.columns = tuple(columns)
        self.rows = rows
        self.summary = summary or {}

    def to_csv(self) -> str:
        return table_to_csv(self.columns, self.rows)

    def to_json(self) -> str:
        d = {
            "version": __version__,
            "columns": list(self.columns),
            "rows": [dict(zip(self.columns, (_plain(x) for x in r))) for r in self.rows],
            "summary": {k: _plain(v) for k, v in self.summary.items()},
            "metadata": {"created": _dt.datetime.now(_dt.timezone.utc).isoformat(), "version": __version__},
        }
        return json.dumps(d, indent=2, sort_keys=True) + "\n"


def _plain(x):
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _g(x) -> str:
    return format_value(float(x))


def _write(args, table: Table) -> None:
    if args.out is None:
        return
    text = table.to_json() if args.format == "json" else table.to_csv()
    try:
        atomic_write_text(args.out, text)
    except OSError as exc:
        raise ConfigError(f"cannot write output {args.out}: {exc}") from None
    log.info("wrote %s", args.out)


def _load(args) -> dict:
    if args.config is None:
        raise ConfigError(f"{args.command} needs --config")
    return load_config(args.config)


# --- subcommands -------------------------------------------------------------

def cmd_axioms(args) -> int:
    cfg = load_config(args.config) if args.config else {}
    if args.scheme:
        schemes = [Scheme(args.scheme, args.n)]
    elif "scheme" in cfg:
        schemes = [build_scheme(cfg)]
    else:
        schemes = [Scheme(name, 2 if name == "iterated-tikhonov" else 1) for name in SCHEME_NAMES]
    t1 = build_spectrum(cfg).norm if "spectrum" in cfg else 1.0
    t_grid = np.geomspace(min(1e-8, t1), t1, 60)
    alpha_grid = t1 * 0.5 ** np.arange(41)
    rows = []
    ok = True
    for scheme in schemes:
        rep = verify_axioms(scheme, t_grid, alpha_grid)
        ok &= rep.passed
        rows.append((scheme.label, rep.gamma1, rep.gamma_star, scheme.gamma_star, rep.monotone_ok, rep.range_ok,
                     rep.lem23_ok, rep.gamma_ok, rep.identity_ok, rep.worst_violation, rep.passed))
        status = "PASS" if rep.passed else f"FAIL (witness {rep.witness})"
        print(f"{scheme.label}: gamma*={_g(rep.gamma_star)} <= {_g(scheme.gamma_star)} "
              f"worst violation {_g(rep.worst_violation)} {status}")
    _write(args, Table(("scheme", "gamma1", "gamma_star", "gamma_star_bound", "monotone_ok", "range_ok",
                        "lem23_ok", "gamma_ok", "identity_ok", "worst_violation", "passed"), rows))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_kn_check(args) -> int:
    cfg = _load(args)
    require(cfg, "kn")
    inst = build_instance(cfg, delta=1.0)
    kn = build_kn(cfg)
    if args.projector:
        rep = check_projector_form(inst.spectrum, inst.v, kn)
    else:
        rep = check_kn(inst.spectrum, inst.v, build_scheme(cfg), kn)
    print(rep.verdict())
    rows = list(zip(rep.alphas.tolist(), rep.lhs.tolist(), rep.rhs.tolist(), rep.ratios.tolist()))
    _write(args, Table(("alpha", "lhs", "rhs", "ratio"), rows,
                       {"passed": rep.passed, "worst_ratio": rep.worst_ratio, "witness_alpha": rep.witness_alpha,
                        "inconclusive": rep.inconclusive, "skipped": rep.skipped}))
    return EXIT_OK if rep.passed else EXIT_FAIL


def _explicit_zeta(noise_cfg, spectrum):
    zeta = np.asarray(noise_cfg["zeta"], dtype=float)
    if zeta.size != spectrum.J:
        raise ConfigError(f"field 'noise/zeta': length {zeta.size} does not match J={spectrum.J}")
    return zeta


def cmd_select(args) -> int:
    cfg = _load(args)
    require(cfg, "rule", "noise", "delta")
    inst = build_instance(cfg)
    spectrum = inst.spectrum
    scheme = build_scheme(cfg)
    grid = build_grid(cfg, spectrum)
    noise = cfg["noise"]
    mode = cfg["rule"].get("mode", "statistical")
    if mode == "statistical":
        if noise["kind"] == "gaussian":
            seed = noise["seed"] if args.seed is None else args.seed
            zeta = sample_zeta(spectrum, seed, noise.get("replicate", 0))
        elif noise["kind"] == "explicit":
            zeta = _explicit_zeta(noise, spectrum)
        else:
            raise ConfigError("field 'noise/kind': statistical selection needs gaussian or explicit noise")
        sel = select_statistical_rg(inst, scheme, grid, build_rule(cfg), inst.data(zeta))
    else:
        if noise["kind"] == "gaussian":
            raise ConfigError("field 'noise/kind': deterministic selection needs power or explicit noise")
        mu = float(noise.get("mu", 0.0))
        det = build_det_rule(cfg)
        bound = PowerLaw(inst.delta, mu)
        if noise["kind"] == "explicit":
            zeta = _explicit_zeta(noise, spectrum)
            if np.linalg.norm(zeta / spectrum.t**mu) > 1.0 + 1e-12:
                raise ConfigError(f"field 'noise/zeta': ||A^-mu zeta|| exceeds 1 for mu={mu}")
        elif "index" in noise:
            j = noise["index"]
            if j >= spectrum.J:
                raise ConfigError(f"field 'noise/index': {j} out of range for J={spectrum.J}")
            w = np.zeros(spectrum.J)
            w[j] = noise.get("sign", 1)
            zeta = power_bounded_zeta(spectrum, mu, w)
        else:
            run = worst_direction_run(inst, scheme, grid, det.tau, det.eta, mu)
            print(f"worst direction: index {run.direction_index}, sign {int(run.sign)}")
            zeta = run.zeta
        alpha_hat = alpha_hat_deterministic(grid, bound, det.eta)
        sel = select_deterministic_rg(inst, scheme, grid, det.tau, bound, alpha_hat, inst.data(zeta))
    print(f"alpha={_g(sel.alpha_selected)} stop={sel.stop_kind.value} steps={sel.steps}")
    rows = [(k, *row) for k, row in enumerate(sel.trace)]
    _write(args, Table(("k", "alpha", "misfit", "regular_threshold", "emergency_lhs", "emergency_rhs"), rows,
                       {"alpha_selected": sel.alpha_selected, "stop_kind": sel.stop_kind.value,
                        "steps": sel.steps}))
    return EXIT_OK


def _export(args, report) -> None:
    if args.out is None:
        return
    try:
        export_report(report, args.out, args.format)
    except OSError as exc:
        raise ConfigError(f"cannot write output {args.out}: {exc}") from None
    log.info("wrote %s", args.out)


def cmd_mc(args) -> int:
    cfg = _load(args)
    exp = build_experiment(cfg, args.seed)
    report = run_experiment(exp)
    for r in report.rows:
        print(f"delta={_g(r.delta)} rmse={_g(r.rmse)} +- {_g(r.rmse_stderr)} ratio={_g(r.ratio)} "
              f"steps={_g(r.mean_steps)} emergency={_g(r.emergency_fraction)} z_violations={r.z_violations}")
    _export(args, report)
    return EXIT_OK if all(r.exhausted == 0 for r in report.rows) else EXIT_FAIL


def cmd_rate(args) -> int:
    cfg = _load(args)
    require(cfg, "source")
    exp = build_experiment(cfg, args.seed)
    slope, theory, report = rate_study(exp)
    gap = abs(slope - theory) / abs(theory)
    print(f"rate_slope={_g(slope)} rate_slope_theory={_g(theory)} relative gap={_g(gap)}")
    _export(args, report)
    return EXIT_OK


def cmd_concentration(args) -> int:
    cfg = _load(args)
    require(cfg, "replicates")
    spectrum = build_spectrum(cfg)
    grid = build_grid(cfg, spectrum)
    rule = cfg.get("rule", {})
    kappa_mode = rule.get("kappa", "auto")
    eta = float(rule.get("eta", 1.0))
    deltas = cfg.get("delta_ladder") or ([cfg["delta"]] if "delta" in cfg else None)
    if not deltas:
        raise ConfigError("missing required field(s) for this subcommand: delta or delta_ladder")
    seed = int(cfg.get("seed", 0) if args.seed is None else args.seed)
    R = int(cfg["replicates"])
    if R < 1000:
        raise ConfigError(f"field 'replicates': concentration study needs at least 1000, got {R}")
    rows = []
    for d in deltas:
        res = concentration_study(spectrum, grid, kappa_mode, float(d), R, seed=seed, eta=eta)
        print(f"delta={_g(res.delta)} kappa={_g(res.kappa)} violations={res.violations}/{R} "
              f"union bound={_g(res.bound_value)}")
        rows.append((res.delta, res.kappa, res.alpha_hat, R, res.violations, res.bound_value, seed))
    _write(args, Table(("delta", "kappa", "alpha_hat", "replicates", "violations", "bound_value", "seed"), rows))
    return EXIT_OK


def cmd_lemmas(args) -> int:
    cfg = _load(args)
    require(cfg, "rule")
    inst = build_instance(cfg, delta=1.0)
    scheme = build_scheme(cfg)
    kw = {}
    if "mus" in cfg:
        kw["mus"] = tuple(cfg["mus"])
    if "delta_ladder" in cfg:
        kw["deltas"] = tuple(cfg["delta_ladder"])
    rep = lemma_suite([inst], [scheme], [build_det_rule(cfg)], kn=build_kn(cfg), **kw)
    if not all(rep.admitted):
        print("instance not admitted by the self-similarity gate; instance-level lemmas reported only")
    for name, checks, failures, worst, passed in rep.rows():
        print(f"{name}: {checks} checks, {failures} failures, worst ratio {_g(worst)} "
              f"{'PASS' if passed else 'FAIL'}")
    _write(args, Table(("lemma", "checks", "failures", "worst_ratio", "passed"), rep.rows(),
                       {"admitted": all(rep.admitted)}))
    return EXIT_OK if rep.passed else EXIT_FAIL


COMMANDS = {
    "axioms": cmd_axioms,
    "kn-check": cmd_kn_check,
    "select": cmd_select,
    "mc": cmd_mc,
    "rate": cmd_rate,
    "concentration": cmd_concentration,
    "lemmas": cmd_lemmas,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--out", help="output file (CSV or JSON)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="statrg", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("axioms", parents=[common], help="check filter axioms")
    p.add_argument("--scheme", choices=SCHEME_NAMES)
    p.add_argument("--n", type=int, default=1, help="order for iterated-tikhonov")
    p = sub.add_parser("kn-check", parents=[common], help="self-similarity admission check")
    p.add_argument("--projector", action="store_true", help="check the projector form instead")
    sub.add_parser("select", parents=[common], help="run one parameter selection")
    sub.add_parser("mc", parents=[common], help="Monte Carlo RMSE and oracle ratios")
    sub.add_parser("rate", parents=[common], help="convergence-rate study")
    sub.add_parser("concentration", parents=[common], help="good-noise event frequency")
    sub.add_parser("lemmas", parents=[common], help="deterministic-rule inequality battery")
    return parser


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (AdmissionError, ExhaustionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except StatRGError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
