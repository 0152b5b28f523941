"""Command-line front end: ``obsfuse {estimate,simulate,design,tune}``.

Every output embeds a run manifest (``#`` header lines for CSV, a
``manifest`` key for JSON).  Exit codes: 0 success, 2 invalid input,
3 estimation failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from dataclasses import dataclass, field, replace

from . import __version__
from .data import load_csv, write_csv
from .efficiency import (
    MomentProfile,
    design_limit_ratio,
    efficiency_ratio,
    predicted_relative_mse,
    quantile_design_profile,
    residual_variance,
)
from .errors import ConfigError, EstimationError, ValidationError
from .estimators import METHOD_ALIASES, Method, estimate
from .robustness import DEFAULT_LAMBDA_GRID, DEFAULT_WEIGHT_GRID, cv_result_rows, tune_lambda, tune_weight
from .simulation import (
    SUMMARY_COLUMNS,
    SWEEPABLE,
    TABLE1_ESTIMATORS,
    config_items,
    draw_sample,
    parse_config,
    run_monte_carlo,
    summary_rows,
)

EXIT_OK, EXIT_VALIDATION, EXIT_ESTIMATION = 0, 2, 3
DEFAULT_Q_GRID = (0.025, 0.05, 0.1, 0.2, 0.3, 0.5)


@dataclass
class RunManifest:
    subcommand: str
    config: dict = field(default_factory=dict)
    seed: int = 0
    version: str = __version__
    input_sha256: str = ""

    def to_dict(self) -> dict:
        return {
            "subcommand": self.subcommand,
            "config": {k: _fmt(v) for k, v in sorted(self.config.items())},
            "seed": self.seed,
            "version": self.version,
            "input_sha256": self.input_sha256,
        }

    def header_lines(self) -> list[str]:
        d = self.to_dict()
        lines = [f"# subcommand: {d['subcommand']}", f"# version: {d['version']}", f"# seed: {d['seed']}", f"# input_sha256: {d['input_sha256']}"]
        lines += [f"# config.{k}: {v}" for k, v in d["config"].items()]
        return lines


def _fmt(v) -> str:
    if isinstance(v, float):
        return "inf" if v == math.inf else repr(v)
    if isinstance(v, (tuple, list)):
        return ",".join(_fmt(x) for x in v)
    return str(v)


def _digest(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def render_csv(manifest: RunManifest, header, rows) -> str:
    buf = io.StringIO()
    for line in manifest.header_lines():
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def read_csv_output(text: str) -> tuple[dict, list[dict]]:
    """Parse a CSV emitted by this tool into (manifest fields, rows)."""
    meta: dict[str, str] = {}
    body = []
    for line in text.splitlines():
        if line.startswith("# "):
            k, _, v = line[2:].partition(": ")
            meta[k] = v
        elif line:
            body.append(line)
    return meta, list(csv.DictReader(body))


def _parse_float(s: str) -> float:
    return math.inf if s.strip().lower() in ("inf", "infinity") else float(s)


# -- subcommands -------------------------------------------------------------------------


def cmd_estimate(args) -> str:
    if args.model == "probit":
        from .probit import probit_combined, probit_experiment_only

        need = ("E",) if args.method == "experiment-only" else ("E", "O")
        ds = load_csv(args.data, require_groups=need)
        if args.method == "experiment-only":
            report = probit_experiment_only(ds)
        elif args.method in ("combined", "gmm"):
            report = probit_combined(ds, args.penalty)
        else:
            raise ConfigError(f"method {args.method!r} is not available for the probit model")
        config = {"model": "probit", "method": args.method, "penalty": args.penalty}
    else:
        method = Method(METHOD_ALIASES[args.method])
        need = ("E",) if method in (Method.EXPERIMENT_ONLY, Method.COMBINED_GMM) else ("E", "O")
        ds = load_csv(args.data, require_groups=need)
        report = estimate(
            ds,
            method,
            lam=args.lam,
            w_O=args.weight,
            weighting=args.weighting,
            obs_variance=args.obs_variance,
            seed=args.seed,
        )
        config = {"model": "linear", "method": args.method, "weighting": args.weighting, "obs_variance": args.obs_variance}
        if method is Method.REGULARIZED:
            config["lambda"] = args.lam
        if method is Method.WEIGHTED and args.weight is not None:
            config["weight"] = args.weight
    manifest = RunManifest("estimate", config, args.seed, input_sha256=_digest(args.data))
    out = report.to_dict()
    out["manifest"] = manifest.to_dict()
    return json.dumps(out, sort_keys=True) + "\n"


def _parse_sweep(text: str) -> tuple[str, list[float]]:
    name, sep, vals = text.partition("=")
    name = name.strip()
    if not sep or name not in SWEEPABLE:
        raise ConfigError(f"--sweep expects name=v1,v2,... with name in {', '.join(SWEEPABLE)}")
    try:
        values = [float(v) for v in vals.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--sweep: cannot parse values {vals!r}") from None
    if not values:
        raise ConfigError("--sweep needs at least one value")
    return name, values


def cmd_simulate(args) -> str:
    with open(args.config, encoding="utf-8") as fh:
        cfg, run = parse_config(fh.read())
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    reps = args.reps if args.reps is not None else run.get("replications", 10_000)
    workers = args.workers if args.workers is not None else run.get("workers", 1)
    estimators = tuple(args.estimators.split(",")) if args.estimators else run.get("estimators", TABLE1_ESTIMATORS)

    if args.emit_samples:
        write_csv(draw_sample(cfg, 0), args.emit_samples)

    config = {**config_items(cfg), "replications": reps, "estimators": estimators}
    if args.sweep:
        name, values = _parse_sweep(args.sweep)
        config["sweep"] = args.sweep
        header = ["sweep_param", "sweep_value", *SUMMARY_COLUMNS]
        rows = []
        for v in values:
            summary = run_monte_carlo(cfg.with_param(name, v), estimators, reps, workers)
            rows += [[name, v, *r] for r in summary_rows(summary)]
    else:
        header = list(SUMMARY_COLUMNS)
        rows = summary_rows(run_monte_carlo(cfg, estimators, reps, workers))
    manifest = RunManifest("simulate", config, cfg.seed, input_sha256=_digest(args.config))
    return render_csv(manifest, header, rows)


DESIGN_COLUMNS = ("design", "var_Z_E", "var_Z_O", "predicted_ratio", "predicted_relative_mse", "limit_ratio")


def cmd_design(args) -> str:
    pi_E = args.pi_E
    if not 0 < pi_E < 1:
        raise ConfigError("--pi-e must lie in (0, 1)")
    sigma_v2 = 1.0 - args.gamma**2 if args.sigma_v2 is None else args.sigma_v2
    rows = []

    def add(label, p: MomentProfile):
        rows.append([label, p.var_Z_E, p.var_Z_O, efficiency_ratio(p), predicted_relative_mse(p), design_limit_ratio(p.var_Z_E, p.var_Z_O)])

    common = dict(gamma=args.gamma, sigma_v2=sigma_v2, sigma2=args.sigma2, n_E=args.n_E)
    if args.var_z_e is not None or args.var_z_o is not None:
        if args.var_z_e is None or args.var_z_o is None:
            raise ConfigError("--var-z-e and --var-z-o must be given together")
        var_x_o = args.gamma**2 * args.var_z_o + sigma_v2
        p = MomentProfile(1 - pi_E, 1.0, var_x_o, args.var_z_e, args.var_z_o, args.gamma, args.sigma2, args.n_E)
        add("custom", p)
    else:
        add("random", quantile_design_profile(None, pi_E, **common))
        try:
            qs = DEFAULT_Q_GRID if args.q is None else [float(v) for v in args.q.split(",")]
            for q in qs:
                add(f"quantile:{q!r}", quantile_design_profile(q, pi_E, **common))
        except ValueError as exc:
            raise ConfigError(f"--q: {exc}") from None
    config = {"pi_E": pi_E, "gamma": args.gamma, "sigma_v2": sigma_v2, "sigma2": args.sigma2, "n_E": args.n_E}
    if args.q is not None:
        config["Q"] = args.q
    if args.var_z_e is not None:
        config.update(var_Z_E=args.var_z_e, var_Z_O=args.var_z_o)
    return render_csv(RunManifest("design", config, 0), DESIGN_COLUMNS, rows)


def cmd_tune(args) -> str:
    ds = load_csv(args.data)
    if args.grid:
        grid = [_parse_float(v) for v in args.grid.split(",")]
    else:
        grid = DEFAULT_WEIGHT_GRID if args.target == "weight" else DEFAULT_LAMBDA_GRID
    result = tune_weight(ds, grid) if args.target == "weight" else tune_lambda(ds, grid)
    config = {"target": args.target, "grid": tuple(float(g) for g in grid)}
    manifest = RunManifest("tune", config, 0, input_sha256=_digest(args.data))
    return render_csv(manifest, ("hyperparameter", "cv_error", "selected"), cv_result_rows(result))


# -- entry point -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="obsfuse", description="Combine experimental and observational samples.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="estimate beta1 from a y,x,z,g CSV; prints JSON")
    p.add_argument("data")
    p.add_argument("--model", choices=("linear", "probit"), default="linear")
    p.add_argument("--method", default="gmm", choices=(*METHOD_ALIASES, "combined"))
    p.add_argument("--lambda", dest="lam", type=_parse_float, default=math.inf, help="regularization weight (inf = exact constraint)")
    p.add_argument("--weight", type=float, default=None, help="fixed w_O for --method weighted (default: inverse variance)")
    p.add_argument("--weighting", choices=("optimal", "twostep"), default="optimal")
    p.add_argument("--obs-variance", choices=("delta", "bootstrap"), default="delta")
    p.add_argument("--penalty", choices=("hard", "quadratic"), default="hard", help="probit constraint mode")
    p.add_argument("--seed", type=int, default=0, help="seed for the bootstrap variance")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("simulate", help="Monte Carlo study from a key = value config; prints CSV")
    p.add_argument("config")
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--sweep", default=None, help="name=v1,v2,... (one row block per value)")
    p.add_argument("--estimators", default=None, help="comma-separated estimator names")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--emit-samples", default=None, metavar="PATH", help="also write replication 0 as CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("design", help="predicted efficiency of assignment designs; prints CSV")
    p.add_argument("--pi-e", dest="pi_E", type=float, default=0.05)
    p.add_argument("--gamma", type=float, default=0.95)
    p.add_argument("--sigma-v2", type=float, default=None)
    p.add_argument("--sigma2", type=float, default=residual_variance())
    p.add_argument("--n-e", dest="n_E", type=int, default=100)
    p.add_argument("--q", default=None, help="comma-separated tail masses")
    p.add_argument("--var-z-e", type=float, default=None)
    p.add_argument("--var-z-o", type=float, default=None)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("tune", help="LOOCV tuning of w_O or lambda; prints CSV")
    p.add_argument("data")
    p.add_argument("--target", choices=("weight", "lambda"), default="weight")
    p.add_argument("--grid", default=None, help="comma-separated values")
    p.set_defaults(func=cmd_tune)
    return parser


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    args = build_parser().parse_args(argv)
    try:
        text = args.func(args)
    except (ValidationError, ConfigError) as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: InputFile: {exc}", file=stderr)
        return EXIT_VALIDATION
    except EstimationError as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_ESTIMATION
    stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
