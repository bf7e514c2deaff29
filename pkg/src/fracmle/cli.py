"""Command-line interface.

Subcommands:
  simulate      simulate a trajectory batch and write it to disk
  stats         reduce a trajectory batch to sufficient statistics (CSV+JSON)
  estimate      run the joint MLE on a sufficient-statistics file
  experiment    full replicated pipeline, emits report JSON + CSV
  converge      discretization-rate study across nested grids
  print-config  dump the effective configuration as TOML

Configuration comes from an optional TOML file (--config) overridden by
flags. Exit codes: 0 success, 1 usage/config error, 2 numerical or
experiment failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError, ExperimentError, FracmleError
from .experiments import ExperimentConfig, run_convergence_study, run_experiment
from .grid import TimeGrid
from .mle import ThetaParams, estimate_joint
from .models import DiffusionSpec, DriftModel
from .sde import (DEFAULT_BLOWUP_GUARD, derive_seed, draw_effects,
                  load_trajectory_batch, save_trajectory_batch, simulate_batch)
from .stats import StatsBatch, batch_sufficient_stats

_DEFAULTS = {
    "model": {
        "hurst": 0.7,
        "drift": "constant:1.0",
        "sigma": 1.0,
        "x0": 1.0,
        "horizon": 5.0,
        "dt": 0.01,
    },
    "effects": {
        "mu": 1.0,
        "sigma0_sq": 1.0,
    },
    "run": {
        "n_paths": 50,
        "replications": 20,
        "master_seed": 0,
        "threads": 1,
        "blowup_guard": DEFAULT_BLOWUP_GUARD,
    },
}


def parse_drift(text: str) -> DriftModel:
    """"constant:<b0>" or "affine:<a0>,<a1>"."""
    kind, _, rest = text.partition(":")
    try:
        if kind == "constant":
            return DriftModel.constant(float(rest))
        if kind == "affine":
            a0, a1 = (float(x) for x in rest.split(","))
            return DriftModel.affine(a0, a1)
    except ValueError as exc:
        raise ConfigError(f"bad drift spec {text!r}: {exc}") from exc
    raise ConfigError(f"unknown drift kind {kind!r} (use constant:<b0> or "
                      f"affine:<a0>,<a1>)")


def _merge(base: dict, override: dict) -> dict:
    out = {k: dict(v) for k, v in base.items()}
    for section, values in override.items():
        if section not in out:
            raise ConfigError(f"unknown config section [{section}]")
        for key, val in values.items():
            if key not in out[section]:
                raise ConfigError(f"unknown config key {section}.{key}")
            out[section][key] = val
    return out


def load_config(path: str | None, args: argparse.Namespace) -> dict:
    cfg = {k: dict(v) for k, v in _DEFAULTS.items()}
    if path:
        with open(path, "rb") as fh:
            cfg = _merge(cfg, tomllib.load(fh))
    flag_map = {
        "hurst": ("model", "hurst"), "drift": ("model", "drift"),
        "sigma": ("model", "sigma"), "x0": ("model", "x0"),
        "horizon": ("model", "horizon"), "dt": ("model", "dt"),
        "mu": ("effects", "mu"), "sigma0_sq": ("effects", "sigma0_sq"),
        "n_paths": ("run", "n_paths"), "replications": ("run", "replications"),
        "seed": ("run", "master_seed"), "threads": ("run", "threads"),
        "blowup_guard": ("run", "blowup_guard"),
    }
    for flag, (section, key) in flag_map.items():
        val = getattr(args, flag, None)
        if val is not None:
            cfg[section][key] = val
    return cfg


def experiment_config(cfg: dict) -> ExperimentConfig:
    m, e, r = cfg["model"], cfg["effects"], cfg["run"]
    return ExperimentConfig(
        hurst=m["hurst"], drift=parse_drift(m["drift"]),
        sigma=DiffusionSpec.constant(m["sigma"]), x0=m["x0"],
        horizon=m["horizon"], dt=m["dt"], n_paths=r["n_paths"],
        true_theta=ThetaParams(e["mu"], e["sigma0_sq"]),
        replications=r["replications"], master_seed=r["master_seed"],
        threads=r["threads"], blowup_guard=r["blowup_guard"])


def _format_toml(cfg: dict) -> str:
    lines = []
    for section, values in cfg.items():
        lines.append(f"[{section}]")
        for key, val in values.items():
            if isinstance(val, str):
                lines.append(f'{key} = "{val}"')
            else:
                lines.append(f"{key} = {val}")
        lines.append("")
    return "\n".join(lines)


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_print_config(cfg, args) -> int:
    sys.stdout.write(_format_toml(cfg))
    return 0


def cmd_simulate(cfg, args) -> int:
    conf = experiment_config(cfg)
    effects = draw_effects(conf.n_paths, conf.true_theta.mu,
                           conf.true_theta.sigma0_sq,
                           derive_seed(conf.master_seed, 0, 0))
    batch = simulate_batch(effects, conf.drift, conf.sigma, conf.grid, conf.x0,
                           derive_seed(conf.master_seed, 0, 1), conf.hurst,
                           blowup_guard=conf.blowup_guard, on_blowup="exclude")
    out = _out_dir(args) / "trajectories.bin"
    save_trajectory_batch(out, batch)
    print(f"wrote {len(batch)} trajectories ({len(batch.failed)} blew up) to {out}")
    return 0


def cmd_stats(cfg, args) -> int:
    batch = load_trajectory_batch(args.batch)
    stats = batch_sufficient_stats(batch)
    out = _out_dir(args)
    stats.to_csv(out / "stats.csv")
    stats.to_json(out / "stats.json")
    print(f"wrote {len(stats)} sufficient statistics to {out}/stats.{{csv,json}}")
    return 0


def cmd_estimate(cfg, args) -> int:
    path = Path(args.stats)
    if path.suffix == ".json":
        stats = StatsBatch.from_json(path)
    else:
        stats = StatsBatch.from_csv(path)
    est = estimate_joint(stats)
    out = _out_dir(args) / "estimate.json"
    est.to_json(out, provenance=stats.provenance)
    print(json.dumps({"mu": est.theta_hat.mu,
                      "sigma0_sq": est.theta_hat.sigma0_sq,
                      "converged": est.converged, "boundary": est.boundary}))
    return 0 if est.converged else 2


def cmd_experiment(cfg, args) -> int:
    conf = experiment_config(cfg)
    report = run_experiment(conf)
    out = _out_dir(args)
    report.to_json(out / "report.json")
    report.to_csv(out / "replications.csv")
    s = report.summary()
    print(f"mu_hat: {s['mu']['mean']:.4f} +- {s['mu']['std']:.4f}   "
          f"sigma0_sq_hat: {s['sigma0_sq']['mean']:.4f} +- "
          f"{s['sigma0_sq']['std']:.4f}   "
          f"({s['failed_replications']} failed replications)")
    print(f"report written to {out}/report.json")
    return 0


def cmd_converge(cfg, args) -> int:
    conf = experiment_config(cfg)
    levels = [int(x) for x in args.levels.split(",")]
    report = run_convergence_study(conf, levels)
    out = _out_dir(args)
    report.to_json(out / "convergence.json")
    report.to_csv(out / "convergence.csv")
    mu, mv = report.median_slopes()
    print(f"median slopes: u {mu:.3f}, v {mv:.3f}  (levels {levels})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracmle",
        description="Mixed-effects SDEs driven by fractional Brownian motion: "
                    "simulation and exact maximum-likelihood estimation.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="TOML configuration file")
        p.add_argument("--out-dir", default=".", help="output directory")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--threads", type=int)
        p.add_argument("--dt", type=float)
        p.add_argument("--replications", type=int)
        p.add_argument("--hurst", type=float)
        p.add_argument("--drift", help="constant:<b0> or affine:<a0>,<a1>")
        p.add_argument("--sigma", type=float)
        p.add_argument("--x0", type=float)
        p.add_argument("--horizon", type=float, help="time horizon T")
        p.add_argument("--mu", type=float, help="true effect mean")
        p.add_argument("--sigma0-sq", dest="sigma0_sq", type=float,
                       help="true effect variance")
        p.add_argument("--n-paths", dest="n_paths", type=int)
        p.add_argument("--blowup-guard", dest="blowup_guard", type=float)

    common(sub.add_parser("simulate", help="simulate one trajectory batch"))
    p = sub.add_parser("stats", help="reduce a trajectory batch to (u, v)")
    common(p)
    p.add_argument("batch", help="trajectory batch file")
    p = sub.add_parser("estimate", help="joint MLE from a stats file")
    common(p)
    p.add_argument("stats", help="sufficient statistics file (.csv or .json)")
    common(sub.add_parser("experiment", help="replicated full pipeline"))
    p = sub.add_parser("converge", help="discretization-rate study")
    common(p)
    p.add_argument("--levels", default="250,500,1000,2000",
                   help="comma-separated nested step counts")
    common(sub.add_parser("print-config", help="dump effective config"))
    return parser


_COMMANDS = {
    "simulate": cmd_simulate,
    "stats": cmd_stats,
    "estimate": cmd_estimate,
    "experiment": cmd_experiment,
    "converge": cmd_converge,
    "print-config": cmd_print_config,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args)
        return _COMMANDS[args.command](cfg, args)
    except (ConfigError, tomllib.TOMLDecodeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ExperimentError, FracmleError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
