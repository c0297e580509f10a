"""Command line front end.

Every subcommand resolves a configuration from an optional JSON file plus
flag overrides, runs, and writes one CSV: a provenance comment line, a
header row, then data rows. Floats are written with 17 significant digits
so identical configurations give byte-identical files.

Exit codes: 0 success, 1 configuration error, 2 invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from dataclasses import dataclass
from typing import Any

import numpy as np

from levycouple import __version__
from levycouple.analysis import Status, build_g, condition_integral, sato_condition
from levycouple.coupling import (
    check_coupling_args,
    qv_rate_probe,
    simulate_couplings,
    sweep_point,
)
from levycouple.errors import (
    ConfigError,
    DomainError,
    InvariantViolation,
    MeasureError,
    NoMassError,
    OracleUnavailable,
)
from levycouple.levy_measure import SymmetricLevyMeasure, eta, measure_from_dict
from levycouple.simulator import eps_for_budget, sample_paths, sample_terminal
from levycouple.tv_oracle import coupling_bound_check, invert_density

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 1, 2

DEFAULTS: dict[str, Any] = {
    "measure": {"family": "stable", "alpha": 1.0, "c": 1.0},
    "a_grid": None,
    "delta_rule": None,
    "eps_rule": None,
    "T": 1.0,
    "T_max": 64.0,
    "n": 10_000,
    "seed": 0,
    "alpha": [0.25, 0.5, 1.0, 1.5],
    "eta_budget": 1e-4,
    "out": None,
}

# keys that do not change the numbers and so stay out of the config hash
_UNHASHED = ("out", "workers")


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % (float(value) + 0.0)
    if value is None:
        return ""
    return str(value)


@dataclass(frozen=True)
class Resolved:
    config: dict[str, Any]
    measure: SymmetricLevyMeasure
    workers: int

    def __getitem__(self, key):
        return self.config[key]

    def a_grid(self) -> list[float]:
        grid = self.config["a_grid"]
        if grid is None:
            raise ConfigError("a_grid is required for this subcommand (--a or config a_grid)")
        if not grid:
            raise ConfigError("a_grid must not be empty")
        for a in grid:
            if not 0.0 < a < 1.0:
                raise ConfigError(f"a_grid values must lie in (0,1), got {a}")
        return list(grid)

    def eps(self, delta: float | None = None) -> float:
        rule = self.config["eps_rule"]
        if rule is None:
            return eps_for_budget(self.measure, self.config["eta_budget"])
        if "fixed" in rule:
            return float(rule["fixed"])
        if delta is None:
            raise ConfigError("eps_rule 'ratio' needs an explicit delta_rule")
        return float(rule["ratio"]) * delta

    def delta_eps(self, a: float) -> tuple[float, float]:
        """Apply the rules; the default δ is a/10 floored at 2ε."""
        rule = self.config["delta_rule"]
        eps_rule = self.config["eps_rule"]
        if rule is None:
            if eps_rule is not None and "ratio" in eps_rule:
                delta = a / 10.0
                eps = self.eps(delta)
            else:
                eps = self.eps()
                delta = max(a / 10.0, 2.0 * eps)
        else:
            delta = float(rule["fixed"]) if "fixed" in rule else float(rule["ratio"]) * a
            eps = self.eps(delta)
        if not delta >= 2.0 * eps:
            raise ConfigError(f"invariant delta >= 2*eps violated: delta={delta:g}, eps={eps:g}")
        check_coupling_args(a, delta, eps)
        return delta, eps


def _rule(value, name, allowed):
    if value is None:
        return None
    if isinstance(value, (int, float)):
        return {"fixed": float(value)}
    if not isinstance(value, dict) or len(value) != 1 or next(iter(value)) not in allowed:
        raise ConfigError(f"{name} must be a number or one of {{{', '.join(allowed)}}}, got {value!r}")
    key, v = next(iter(value.items()))
    if not isinstance(v, (int, float)) or not v > 0:
        raise ConfigError(f"{name}.{key} must be a positive number")
    return {key: float(v)}


def load_config(args: argparse.Namespace) -> dict[str, Any]:
    config = dict(DEFAULTS)
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {args.config} is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(data) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        config.update(data)

    if args.measure is not None:
        try:
            config["measure"] = json.loads(args.measure)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--measure is not valid JSON: {exc}") from None
    if args.eps_family is not None:
        config["measure"] = {"family": "powerlog", "eps": args.eps_family}
    overrides = {
        "a_grid": args.a, "T": args.T, "T_max": args.T_max, "n": args.n,
        "seed": args.seed, "alpha": args.alpha, "out": args.out,
    }
    for key, value in overrides.items():
        if value is not None:
            config[key] = value
    if args.delta is not None:
        config["delta_rule"] = {"fixed": args.delta}
    if args.eps is not None:
        config["eps_rule"] = {"fixed": args.eps}

    config["delta_rule"] = _rule(config["delta_rule"], "delta_rule", ("fixed", "ratio"))
    config["eps_rule"] = _rule(config["eps_rule"], "eps_rule", ("fixed", "ratio"))
    if config["a_grid"] is not None:
        if not isinstance(config["a_grid"], list):
            raise ConfigError("a_grid must be a list")
        config["a_grid"] = [float(a) for a in config["a_grid"]]
    for key in ("T", "T_max", "eta_budget"):
        config[key] = float(config[key])
        if not config[key] > 0:
            raise ConfigError(f"{key} must be positive")
    if config["T_max"] < config["T"]:
        raise ConfigError("T_max must be at least T")
    n = config["n"]
    if isinstance(n, float) and n.is_integer():
        n = int(n)
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ConfigError("n must be a positive integer")
    config["n"] = n
    seed = config["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2 ** 64:
        raise ConfigError("seed must be an integer in [0, 2^64)")
    config["alpha"] = [float(x) for x in config["alpha"]]
    return config


def config_hash(config: dict[str, Any], command: str) -> str:
    payload = {k: v for k, v in config.items() if k not in _UNHASHED}
    payload["command"] = command
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


# subcommand bodies return (header, rows, violations)

def cmd_check_condition(cfg: Resolved, args):
    verdict = condition_integral(cfg.measure)
    header = ["measure", "status", "value", "error", "local_exponent"]
    row = [cfg.measure.label, verdict.status.value, verdict.value, verdict.error,
           verdict.local_exponent_at_0]
    for alpha in cfg["alpha"]:
        header.append(f"sato_{fmt(alpha)}")
        row.append(sato_condition(cfg.measure, alpha).holds)
    return header, [row], 0


def cmd_eta(cfg: Resolved, args):
    xs = np.logspace(-6.0, 0.0, args.points)
    xs[-1] = 1.0
    etas = eta(cfg.measure, xs)
    if condition_integral(cfg.measure).status is Status.FINITE:
        table = build_g(cfg.measure)
        gs, gps = table.g(xs), table.gprime(xs)
    else:
        gs = gps = [None] * len(xs)
    rows = [[x, e, g, gp] for x, e, g, gp in zip(xs, etas, gs, gps)]
    return ["x", "eta", "g", "gprime"], rows, 0


def cmd_simulate(cfg: Resolved, args):
    eps = cfg.eps()
    if args.terminal:
        values = sample_terminal(cfg.measure, eps, cfg["T"], cfg["n"], cfg["seed"], cfg.workers)
        return ["replication", "X_T"], [[i, v] for i, v in enumerate(values)], 0
    rows = []
    for i, path in enumerate(sample_paths(cfg.measure, eps, cfg["T"], cfg["n"], cfg["seed"])):
        for t, x in zip(path.times, np.cumsum(path.jumps)):
            rows.append([i, t, x])
    return ["replication", "t", "x"], rows, 0


def _finite_mean(values):
    values = np.asarray(values, dtype=float)
    values = values[np.isfinite(values)]
    return float(np.mean(values)) if len(values) else math.nan


def cmd_couple(cfg: Resolved, args):
    header = ["a", "replication", "coupled", "tau_delta", "tau_bar", "z_at_tau_bar", "max_z"]
    rows, violations = [], 0
    for a in cfg.a_grid():
        delta, eps = cfg.delta_eps(a)
        batch = simulate_couplings(cfg.measure, a, delta, eps, cfg["T"], cfg["n"], cfg["seed"],
                                   workers=cfg.workers)
        violations += batch.total_violations()
        for i in range(len(batch)):
            rows.append([a, i, bool(batch.coupled[i]), batch.tau_delta[i], batch.tau_bar[i],
                         batch.z_at_tau_bar[i], batch.max_z[i]])
        rows.append([a, "summary", float(np.mean(batch.coupled)), _finite_mean(batch.tau_delta),
                     _finite_mean(batch.tau_bar), _finite_mean(batch.z_at_tau_bar),
                     float(np.mean(batch.max_z))])
    return header, rows, violations


def cmd_sweep(cfg: Resolved, args):
    header = ["a", "delta", "eps", "p_uncoupled", "p_stderr", "e_tau_bar", "tau_stderr",
              "censor_fraction", "upper_exit_fraction", "martingale_mean", "martingale_stderr",
              "violations"]
    rows, violations = [], 0
    for a in cfg.a_grid():
        delta, eps = cfg.delta_eps(a)
        r = sweep_point(cfg.measure, a, delta, eps, cfg["T"], cfg["T_max"], cfg["n"],
                        cfg["seed"], cfg.workers)
        violations += r.violations
        rows.append([a, delta, eps, r.p_uncoupled.mean, r.p_uncoupled.stderr,
                     r.exit_time.estimate.mean, r.exit_time.estimate.stderr,
                     r.exit_time.censor_fraction, r.upper_exit_fraction,
                     r.martingale.mean, r.martingale.stderr, r.violations])
    return header, rows, violations


def cmd_oracle_tv(cfg: Resolved, args):
    grid = invert_density(cfg.measure)
    rows = []
    for a in cfg.a_grid():
        tv, err = grid.tv_shift(a)
        rows.append([a, tv, err])
    return ["a", "tv", "error_bound"], rows, 0


def cmd_bound_check(cfg: Resolved, args):
    header = ["a", "tv", "p_uncoupled", "stderr", "slack", "tv_error", "allowance",
              "half_mass_slack"]
    rows = []
    for a in cfg.a_grid():
        delta, eps = cfg.delta_eps(a)
        c = coupling_bound_check(cfg.measure, a, delta, eps, cfg["n"], cfg["seed"], cfg["T"],
                                 workers=cfg.workers)
        rows.append([a, c.tv, c.p_uncoupled.mean, c.p_uncoupled.stderr, c.slack, c.tv_error,
                     c.allowance, c.half_mass_slack])
    return header, rows, 0


def cmd_qv_probe(cfg: Resolved, args):
    header = ["z", "empirical_rate", "stderr", "ci_lo", "ci_hi", "candidate_a", "candidate_b",
              "matches", "multi_event_fraction"]
    rule = cfg["eps_rule"]
    eps = rule["fixed"] if rule and "fixed" in rule else None
    rows = []
    for z in cfg.a_grid():
        p = qv_rate_probe(cfg.measure, z, eps=eps, horizon=args.horizon, n=cfg["n"],
                          seed=cfg["seed"], workers=cfg.workers)
        rows.append([z, p.empirical_rate.mean, p.empirical_rate.stderr, *p.empirical_rate.ci95,
                     p.candidate_a, p.candidate_b, p.matches, p.multi_event_fraction])
    return header, rows, 0


COMMANDS = {
    "check-condition": (cmd_check_condition, "decide the integral condition and the Sato comparator"),
    "eta": (cmd_eta, "tabulate eta, g and g' on a geometric grid in (0, 1]"),
    "simulate": (cmd_simulate, "sample truncated paths or terminal values"),
    "couple": (cmd_couple, "per-replication mirror coupling results"),
    "sweep": (cmd_sweep, "uncoupled probability and exit time over an a-grid"),
    "oracle-tv": (cmd_oracle_tv, "total variation of a shift from the Fourier oracle"),
    "bound-check": (cmd_bound_check, "oracle TV against twice the uncoupled probability"),
    "qv-probe": (cmd_qv_probe, "rate of mirrored quadratic variation near a level z"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON experiment config")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", metavar="PATH", help="CSV output path (default: stdout)")
    common.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    common.add_argument("--measure", metavar="JSON", help='e.g. \'{"family":"stable","alpha":1}\'')
    common.add_argument("--eps-family", type=float, metavar="EPS",
                        help="use the power-log measure with this exponent")
    common.add_argument("--a", type=float, nargs="+", metavar="A")
    common.add_argument("--delta", type=float)
    common.add_argument("--eps", type=float)
    common.add_argument("--n", type=int)
    common.add_argument("--alpha", type=float, nargs="+")
    common.add_argument("--T", type=float)
    common.add_argument("--T-max", dest="T_max", type=float)

    parser = argparse.ArgumentParser(prog="levycouple", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        if name == "simulate":
            p.add_argument("--terminal", action="store_true", help="write X_T only")
        if name == "eta":
            p.add_argument("--points", type=int, default=61)
        if name == "qv-probe":
            p.add_argument("--horizon", type=float, default=0.01)
    return parser


def render(command: str, config: dict[str, Any], header, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# levycouple {command} config_sha256={config_hash(config, command)} "
              f"seed={config['seed']} version={__version__}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        config = load_config(args)
        measure = measure_from_dict(config["measure"])
        resolved = Resolved(config, measure, args.workers)
        header, rows, violations = COMMANDS[args.command][0](resolved, args)
    except InvariantViolation as exc:
        print(f"levycouple: invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (ConfigError, MeasureError, DomainError, NoMassError, OracleUnavailable) as exc:
        print(f"levycouple: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    text = render(args.command, config, header, rows)
    if config["out"]:
        with open(config["out"], "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if violations:
        print(f"levycouple: {violations} invariant violation(s) recorded", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def main() -> None:
    sys.exit(run())
