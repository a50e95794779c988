"""Command-line front end.

Exit codes: 0 success, 1 a statistical check failed (the report is still
written), 2 usage or configuration error.  Data goes to files under --out;
progress goes to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import analytics as an
from . import j1
from .chains import ChainKind, run_chain, trajectory_to_csv
from .harness import ConfigError, ExperimentConfig, ExperimentReport, run_experiment
from .limit_process import build_limit_path, jump_log_to_csv, limit_path_to_csv
from .sampling import Pareto, Rademacher, RngStream, eta_family_from_dict, xi_family_from_dict
from .selftest import run_selftest

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _log(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get("PERTURBED_WALKS_OUT", "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_meta(path: Path, **fields) -> None:
    fields.update(version=__version__, finished_at=time.strftime("%Y-%m-%dT%H:%M:%S"))
    path.write_text(json.dumps(fields, indent=2, sort_keys=True) + "\n")


def _load_config(args, experiment: str, **extra) -> ExperimentConfig:
    overrides = dict(seed=args.seed, replicates=args.replicates, alpha=getattr(args, "alpha", None),
                     dt=getattr(args, "dt", None), delta=getattr(args, "delta", None), **extra)
    if getattr(args, "v", None):
        overrides["v"] = args.v
    if getattr(args, "t", None):
        overrides["t"] = args.t
    if getattr(args, "kind", None):
        overrides["kinds"] = args.kind
    if args.config:
        cfg = ExperimentConfig.from_json(args.config, **overrides)
        if cfg.experiment != experiment:
            raise ConfigError(f"config is for experiment {cfg.experiment!r}, not {experiment!r}")
        return cfg
    base = {"experiment": experiment}
    if overrides.get("alpha") is not None:
        base["eta"] = {"family": "pareto", "alpha": overrides["alpha"], "xmin": 1.0}
    return ExperimentConfig.from_dict(base, **overrides)


def _finish(report: ExperimentReport, args, stem: str) -> int:
    paths = report.write(_out_dir(args), stem)
    for c in report.checks:
        _log(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.statistic:.6g} vs {c.threshold:.6g} {c.detail}")
    _log(f"wrote {paths['json']} and {paths['csv']}")
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


# ---------------------------------------------------------------- commands


def cmd_simulate_chain(args) -> int:
    if args.steps is None or args.steps < 1:
        raise UsageError("--steps must be a positive integer")
    if args.alpha is not None and not 0 < args.alpha < 1:
        raise UsageError("--alpha must lie in (0, 1)")
    kind = ChainKind.parse(args.kind[0] if args.kind else "tilde")
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
            xi_f, eta_f = xi_family_from_dict(data["xi"]), eta_family_from_dict(data["eta"])
        except (OSError, ValueError, KeyError, TypeError) as err:
            raise ConfigError(f"cannot read families from {args.config}: {err}") from None
    else:
        xi_f, eta_f = Rademacher(), Pareto(args.alpha if args.alpha is not None else 0.5)
    seed = args.seed if args.seed is not None else 0
    g = RngStream(seed).generator()
    traj = run_chain(kind, xi_f.sample(g, args.steps), eta_f.sample(g, args.steps))
    out = _out_dir(args)
    name = f"chain_{kind.name.lower()}_seed{seed}"
    trajectory_to_csv(traj, out / f"{name}.csv")
    _write_meta(out / f"{name}.meta.json", kind=kind.name.lower(), steps=args.steps, seed=seed,
                xi=xi_f.to_dict(), eta=eta_f.to_dict())
    _log(f"wrote {out / (name + '.csv')}")
    return EXIT_OK


def cmd_simulate_limit(args) -> int:
    alpha = args.alpha if args.alpha is not None else 0.5
    horizon = args.t[0] if args.t else 1.0
    dt = args.dt if args.dt is not None else 2.0**-12
    seed = args.seed if args.seed is not None else 0
    if horizon <= 0 or dt <= 0 or args.x0 < 0:
        raise UsageError("--t and --dt must be positive and --x0 nonnegative")
    if not 0 < alpha < 1:
        raise UsageError("--alpha must lie in (0, 1)")
    mode = "jumps" if args.delta is not None else "grid"
    path = build_limit_path(args.x0, horizon, dt, alpha, RngStream(seed), mode=mode,
                            delta=args.delta if args.delta is not None else 1e-4)
    out = _out_dir(args)
    name = f"limit_alpha{alpha:g}_seed{seed}"
    limit_path_to_csv(path, out / f"{name}.csv")
    jump_log_to_csv(path, out / f"{name}_jumps.csv")
    meta = {**path.meta, "alpha": alpha, "T": horizon, "dt": dt, "seed": seed, "x0": args.x0, "mode": mode}
    _write_meta(out / f"{name}.meta.json", **meta)
    _log(f"wrote {out / (name + '.csv')}")
    return EXIT_OK


def cmd_converge(args) -> int:
    cfg = _load_config(args, "convergence")
    _log(f"convergence study: v={cfg.v} t={cfg.t} replicates={cfg.replicates} batches={cfg.batches}")
    return _finish(run_experiment(cfg, args.threads), args, f"converge_seed{cfg.seed}")


def cmd_localtime(args) -> int:
    cfg = _load_config(args, "localtime")
    _log(f"local-time study: {cfg.replicates} paths, dt={cfg.dt:g}, delta={cfg.delta:g}")
    return _finish(run_experiment(cfg, args.threads), args, f"localtime_seed{cfg.seed}")


def cmd_analytics_table(args) -> int:
    alpha = args.alpha if args.alpha is not None else 0.5
    t = args.t[0] if args.t else 1.0
    if not 0 < alpha < 1 or t <= 0:
        raise UsageError("--alpha must lie in (0, 1) and --t be positive")
    out = _out_dir(args)
    grids = {
        "dynkin_lamperti_pdf": (np.linspace(t, 10 * t, 201)[1:], lambda x: an.dynkin_lamperti_pdf(alpha, t, x)),
        "killed_survival": (np.linspace(0, 5, 201), lambda x: an.killed_survival(t, x)),
        "entrance_law_density": (np.linspace(0, 5, 101)[1:], lambda y: an.entrance_law_density(alpha, t, y)),
        "resolvent_r_lambda1_x1": (np.linspace(0, 5, 101)[1:], lambda y: an.resolvent_kernel_r(alpha, 1.0, 1.0, y)),
    }
    for name, (xs, fn) in grids.items():
        vals = np.atleast_1d(fn(xs))
        with open(out / f"{name}.csv", "w") as fh:
            fh.write("x,value\n")
            for x, v in zip(xs, vals):
                fh.write(f"{float(x)!r},{float(v)!r}\n")
    constants = {"alpha": alpha, "t": t, "delta_lambda_1": an.delta_lambda(alpha, 1.0),
                 "excursion_constant": an.excursion_constant(alpha),
                 "entrance_law_mass": an.entrance_law_mass(alpha, t)}
    (out / "analytics_constants.json").write_text(json.dumps(constants, indent=2, sort_keys=True) + "\n")
    _log(f"wrote {len(grids)} tables to {out}")
    return EXIT_OK


def _read_step(path: str, horizon) -> j1.CadlagStepFunction:
    try:
        return j1.CadlagStepFunction.from_json(Path(path).read_text(), horizon)
    except (OSError, ValueError, KeyError) as err:
        raise UsageError(f"cannot read step function {path}: {err}") from None


def cmd_j1_check(args) -> int:
    if args.f or args.g:
        if not (args.f and args.g):
            raise UsageError("--f and --g go together")
        f, g = _read_step(args.f, args.horizon), _read_step(args.g, args.horizon)
        res = j1.j1_distance(f, g, args.horizon)
        print(json.dumps({"distance": float(res.distance), "placements": [float(p) for p in res.placements],
                          "path": [list(s) for s in res.path],
                          "sup_distance": float(j1.sup_distance(f, g))}, indent=2))
        return EXIT_OK
    seed = args.seed if args.seed is not None else 0
    count = args.replicates if args.replicates is not None else 200
    run = j1.lemma_composition_harness if args.harness == "composition" else j1.lemma_timechange_harness
    reports = [run(seed + i, args.n_max) for i in range(count)]
    out = _out_dir(args)
    stem = f"j1_{args.harness}_seed{seed}"
    (out / f"{stem}.json").write_text(json.dumps([r.to_dict() for r in reports], indent=2) + "\n")
    counts = {s: sum(r.status == s for r in reports) for s in ("PASS", "FAIL", "OUT_OF_HYPOTHESIS")}
    _log(f"{args.harness}: {counts}")
    return EXIT_OK if counts["FAIL"] == 0 else EXIT_CHECK_FAILED


def cmd_selftest(args) -> int:
    return EXIT_OK if run_selftest(_log) else EXIT_CHECK_FAILED


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="perturbed-walks", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, *flags):
        sp.add_argument("--out", help="output directory (default $PERTURBED_WALKS_OUT or ./out)")
        sp.add_argument("--seed", type=int)
        if "config" in flags:
            sp.add_argument("--config", help="JSON experiment config")
        if "replicates" in flags:
            sp.add_argument("--replicates", type=int)
        if "threads" in flags:
            sp.add_argument("--threads", type=int, help="worker threads (default $PERTURBED_WALKS_THREADS or all cores)")
        if "alpha" in flags:
            sp.add_argument("--alpha", type=float)
        if "v" in flags:
            sp.add_argument("--v", type=float, nargs="+")
        if "t" in flags:
            sp.add_argument("--t", type=float, nargs="+")
        if "dt" in flags:
            sp.add_argument("--dt", type=float)
        if "delta" in flags:
            sp.add_argument("--delta", type=float)
        if "kind" in flags:
            sp.add_argument("--kind", nargs="+", choices=[k.name.lower() for k in ChainKind])

    sp = sub.add_parser("simulate-chain", help="simulate one chain path")
    common(sp, "config", "alpha", "kind")
    sp.add_argument("--steps", type=int)
    sp.set_defaults(func=cmd_simulate_chain)

    sp = sub.add_parser("simulate-limit", help="simulate one path of the limit process")
    common(sp, "alpha", "t", "dt", "delta")
    sp.add_argument("--x0", type=float, default=0.0)
    sp.set_defaults(func=cmd_simulate_limit)

    sp = sub.add_parser("converge", help="chain-to-limit convergence study")
    common(sp, "config", "replicates", "threads", "alpha", "v", "t", "kind")
    sp.set_defaults(func=cmd_converge)

    sp = sub.add_parser("localtime", help="local-time estimator study")
    common(sp, "config", "replicates", "threads", "alpha", "dt", "delta")
    sp.set_defaults(func=cmd_localtime)

    sp = sub.add_parser("analytics-table", help="tabulate densities and kernels")
    common(sp, "alpha", "t")
    sp.set_defaults(func=cmd_analytics_table)

    sp = sub.add_parser("j1-check", help="J1 distance of two step functions, or a lemma harness batch")
    common(sp, "replicates")
    sp.add_argument("--f", help="JSON step function")
    sp.add_argument("--g", help="JSON step function")
    sp.add_argument("--horizon", type=float)
    sp.add_argument("--harness", choices=["composition", "timechange"], default="composition")
    sp.add_argument("--n-max", type=int, default=256)
    sp.set_defaults(func=cmd_j1_check)

    sp = sub.add_parser("selftest", help="run the worked-example checks")
    sp.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, ConfigError) as err:
        _log(f"error: {err}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
