"""Command-line entry point: ``ldpeff <subcommand> [flags]``.

Exit status is 0 on success, 2 on a usage error (bad or missing flags,
unknown model) and 1 when a computation fails. Stochastic subcommands refuse
to run without ``--seed``. Each subcommand accepts ``--config file.json``
whose keys are flag names (dashes or underscores); explicit flags win over
the file, which wins over built-in defaults.

Floats are printed with ``repr``, the shortest decimal that round-trips to
the same double.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DomainError
from .estimators import TwoStepConfig, two_step_estimate
from .fisher import fisher_info_private
from .kernels import Channel, make_rng
from .models import DiscreteModel, discretize, fisher_info_raw, model_from_name
from .simlab import ESTIMATORS, SimulationConfig, bound_table, run_experiment, write_csv
from .staircase import solve_optimal_mechanism

__all__ = ["main", "parse_and_dispatch", "build_parser", "RunManifest"]

THREADS_ENV = "LDP_EFF_THREADS"

# built-in defaults; flags and --config values override these
DEFAULTS = {
    "fisher": {"channel": None, "eps": 0.05},
    "optimize": {"json": None, "eps": 0.05},
    "two-step": {"n1_exp": 0.7, "out": None},
    "simulate": {"estimator": "two-step", "n1_exp": 0.7, "threads": 1, "out_csv": None, "out_json": None},
    "bound-table": {"out": None},
    "validate": {"alpha": None},
}
REQUIRED = {
    "fisher": ("model", "theta", "alpha"),
    "optimize": ("model", "theta", "alpha"),
    "two-step": ("model", "theta0", "alpha", "n", "seed"),
    "simulate": ("model", "theta0", "alpha", "n", "reps", "seed"),
    "bound-table": ("model", "thetas", "alphas"),
    "validate": ("channel",),
}


class UsageError(Exception):
    """Bad command-line input; reported with exit status 2."""


def RunManifest(subcommand: str, config: dict, seed=None) -> dict:
    """Provenance record embedded in, or written next to, every output file."""
    return {
        "subcommand": subcommand,
        "config": config,
        "library_version": __version__,
        "seed": seed,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }


def fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ldpeff", description="Fisher-information-optimal LDP mechanisms and private estimation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND", parser_class=_Parser)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", help="JSON file of flag values (flags on the command line take precedence)")
        return p

    p = add("fisher", "Raw and private Fisher information, one CSV row per theta.")
    p.add_argument("--model", help="bernoulli, binomial:m or gaussian-location:sigma")
    p.add_argument("--theta", type=_float_list, help="comma-separated parameter values")
    p.add_argument("--alpha", type=float)
    p.add_argument("--channel", help="channel JSON to evaluate (default: the optimal channel at each theta)")
    p.add_argument("--eps", type=float, help="discretization tolerance for continuous models")

    p = add("optimize", "Solve for the Fisher-information-optimal alpha-private channel.")
    p.add_argument("--model")
    p.add_argument("--theta", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--json", help="write the channel (with manifest) to this file")
    p.add_argument("--eps", type=float, help="discretization tolerance for continuous models")

    p = add("two-step", "Simulate data at theta0 and run the two-step private MLE.")
    p.add_argument("--model")
    p.add_argument("--theta0", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--n1-exp", type=float, dest="n1_exp")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="result JSON path")

    p = add("simulate", "Monte Carlo comparison of an estimator's variance with 1/I*.")
    p.add_argument("--model")
    p.add_argument("--theta0", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--estimator", choices=ESTIMATORS)
    p.add_argument("--n1-exp", type=float, dest="n1_exp")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, help=f"worker threads (fallback: ${THREADS_ENV})")
    p.add_argument("--out-csv", dest="out_csv")
    p.add_argument("--out-json", dest="out_json")

    p = add("bound-table", "Table of I*, 1/I*, raw information and the randomized-response baseline.")
    p.add_argument("--model")
    p.add_argument("--thetas", type=_float_list)
    p.add_argument("--alphas", type=_float_list)
    p.add_argument("--out", help="CSV path (a .manifest.json sidecar is written next to it)")

    p = add("validate", "Check that a channel JSON is column-stochastic and alpha-private.")
    p.add_argument("--channel")
    p.add_argument("--alpha", type=float, help="privacy level to check (default: the file's alpha)")
    return parser


def resolve_config(command: str, args: argparse.Namespace, environ=None) -> dict:
    """Merge defaults < config file < explicit flags and check required keys."""
    environ = os.environ if environ is None else environ
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    cfg = dict(DEFAULTS[command])
    if command == "simulate" and environ.get(THREADS_ENV):
        try:
            cfg["threads"] = int(environ[THREADS_ENV])
        except ValueError:
            raise UsageError(f"{THREADS_ENV} must be an integer, got {environ[THREADS_ENV]!r}") from None
    if args.config:
        try:
            from_file = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"--config: cannot read {args.config}: {exc}") from None
        if not isinstance(from_file, dict):
            raise UsageError("--config: expected a JSON object")
        for key, value in from_file.items():
            key = key.replace("-", "_")
            if key not in flags:
                raise UsageError(f"--config: unknown key {key!r} for {command}")
            if key in ("theta", "thetas", "alphas") and not isinstance(value, list) and command != "optimize":
                value = [value]
            cfg[key] = value
    cfg.update({k: v for k, v in flags.items() if v is not None})
    for key in REQUIRED[command]:
        if cfg.get(key) is None:
            flag = "--" + key.replace("_", "-")
            if key == "seed":
                raise UsageError(f"{command}: {flag} is required; stochastic subcommands never pick a seed implicitly")
            raise UsageError(f"{command}: {flag} is required")
    if "model" in REQUIRED[command]:
        try:
            model_from_name(cfg["model"])
        except ValueError as exc:
            raise UsageError(f"--model: {exc}") from None
    if cfg.get("alpha") is not None and not cfg["alpha"] > 0:
        raise UsageError(f"--alpha must be positive, got {cfg['alpha']!r}")
    return cfg


def _finite_model(model, theta, alpha, eps):
    if isinstance(model, DiscreteModel):
        return model
    return discretize(model, theta, eps, alpha=alpha)[0]


def _cmd_fisher(cfg, out):
    model = model_from_name(cfg["model"])
    alpha = cfg["alpha"]
    channel = Channel.load(cfg["channel"]) if cfg["channel"] else None
    out.write("theta,alpha,raw,private,ratio\n")
    for theta in cfg["theta"]:
        finite = _finite_model(model, theta, alpha, cfg["eps"])
        raw = fisher_info_raw(finite, theta)
        if channel is None:
            private = solve_optimal_mechanism(finite, theta, alpha).i_star
        else:
            private = fisher_info_private(channel, finite, theta)
        ratio = private / raw if raw > 0 else math.nan
        out.write(",".join(fmt(v) for v in (float(theta), float(alpha), raw, private, ratio)) + "\n")
    return 0


def _cmd_optimize(cfg, out):
    model = model_from_name(cfg["model"])
    finite = _finite_model(model, cfg["theta"], cfg["alpha"], cfg["eps"])
    res = solve_optimal_mechanism(finite, cfg["theta"], cfg["alpha"])
    out.write(f"I*={fmt(res.i_star)}\n")
    out.write(f"active_patterns={','.join(str(m) for m in res.active_patterns)}\n")
    if cfg["json"]:
        res.channel.save(
            cfg["json"],
            i_star=res.i_star,
            active_patterns=list(res.active_patterns),
            manifest=RunManifest("optimize", cfg),
        )
    return 0


def _cmd_two_step(cfg, out):
    model = model_from_name(cfg["model"])
    rng = make_rng(cfg["seed"])
    if isinstance(model, DiscreteModel):
        x = np.asarray(model.labels)[model.sample(cfg["theta0"], cfg["n"], rng)]
    else:
        x = model.sample(cfg["theta0"], cfg["n"], rng)
    ts_cfg = TwoStepConfig(n=cfg["n"], alpha=cfg["alpha"], n1_exponent=cfg["n1_exp"], seed=cfg["seed"])
    res = two_step_estimate(x, model, ts_cfg, rng)
    for key in ("theta_tilde", "theta_hat", "k_hat", "i_star_hat", "n1", "n2"):
        out.write(f"{key}={fmt(getattr(res, key))}\n")
    if cfg["out"]:
        payload = {**res.to_dict(), "config": cfg, "manifest": RunManifest("two-step", cfg, cfg["seed"])}
        Path(cfg["out"]).write_text(json.dumps(payload, indent=2) + "\n")
    return 0


def _cmd_simulate(cfg, out):
    sim = SimulationConfig(
        model=cfg["model"],
        theta0=cfg["theta0"],
        alpha=cfg["alpha"],
        n=cfg["n"],
        reps=cfg["reps"],
        estimator=cfg["estimator"],
        seed=cfg["seed"],
        n1_exponent=cfg["n1_exp"],
        threads=cfg["threads"],
        out_csv=cfg["out_csv"],
        out_json=cfg["out_json"],
    )
    summary = run_experiment(sim)
    for key in ("mean", "bias", "n_var", "bound", "ratio", "std_error", "wall_clock"):
        value = getattr(summary, key)
        out.write(f"{key}={'null' if value is None else fmt(value)}\n")
    return 0


def _cmd_bound_table(cfg, out):
    model = model_from_name(cfg["model"])
    if not isinstance(model, DiscreteModel):
        raise UsageError("--model: bound-table needs a finite model (bernoulli or binomial:m)")
    rows = bound_table(model, cfg["thetas"], cfg["alphas"])
    header = ["theta", "alpha", "i_star", "inv_i_star", "i_raw", "rr_info"]
    if cfg["out"]:
        write_csv(cfg["out"], header, rows)
        Path(cfg["out"] + ".manifest.json").write_text(json.dumps(RunManifest("bound-table", cfg), indent=2) + "\n")
    else:
        out.write(",".join(header) + "\n")
        for row in rows:
            out.write(",".join(fmt(row[h]) for h in header) + "\n")
    return 0


def _cmd_validate(cfg, out):
    try:
        channel = Channel.load(cfg["channel"])
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        out.write(f"invalid: cannot read channel: {exc}\n")
        return 1
    report = channel.validate(cfg["alpha"])
    alpha = channel.alpha if cfg["alpha"] is None else cfg["alpha"]
    if report:
        out.write(f"ok: {channel.shape[0]}x{channel.shape[1]} channel is {fmt(alpha)}-private\n")
        return 0
    out.write(f"invalid: {report.reason}\n")
    return 1


COMMANDS = {
    "fisher": _cmd_fisher,
    "optimize": _cmd_optimize,
    "two-step": _cmd_two_step,
    "simulate": _cmd_simulate,
    "bound-table": _cmd_bound_table,
    "validate": _cmd_validate,
}


def parse_and_dispatch(argv=None, out=None, err=None, environ=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    parser = build_parser()
    try:
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:  # --help / --version
            return int(exc.code or 0)
        if args.command is None:
            raise UsageError("ldpeff: a subcommand is required (see --help)")
        cfg = resolve_config(args.command, args, environ)
        return COMMANDS[args.command](cfg, out)
    except UsageError as exc:
        err.write(f"usage error: {exc}\n")
        return 2
    except DomainError as exc:
        err.write(f"usage error: {exc}\n")
        return 2
    except Exception as exc:
        err.write(f"error: {type(exc).__name__}: {exc}\n")
        return 1


def main(argv=None) -> None:
    sys.exit(parse_and_dispatch(argv))


if __name__ == "__main__":
    main()
