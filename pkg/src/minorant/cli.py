"""Command-line runner: simulate, verify, density, identity, dump, report."""

from __future__ import annotations

import argparse
import csv
import datetime
import glob
import json
import os
import sys
from typing import Optional

import numpy as np

from . import analytic, hull, pathsim, pointproc, taurho, verify
from .config import ConfigError, ExperimentConfig
from .randkit import RngStream
from .stats import TestReport, write_summary_csv

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

CITATIONS = {
    "path": "sampled path on a uniform grid",
    "faces": "faces of the greatest convex minorant of a sampled path",
    "points": "Poisson process of minorant faces restricted to a slope window",
    "trajectory": "(tau, rho) recursion started from a named initial law",
    "curve": "closed-form curve tabulated on interior grid points",
}


class UsageError(Exception):
    pass


def _parse_tol(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"--tol expects name=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k.strip()] = float(v)
        except ValueError:
            raise UsageError(f"--tol {k}: not a number: {v!r}") from None
    return out


def build_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    return cfg.with_overrides(master_seed=args.seed, replicas=args.replicas, grid_n=args.grid_n,
                              workers=args.workers, output_dir=args.out, chain_length=args.chain_length,
                              tolerances=_parse_tol(args.tol))


def _outdir(cfg: ExperimentConfig) -> str:
    try:
        os.makedirs(cfg.output_dir, exist_ok=True)
    except OSError as e:
        raise UsageError(f"cannot create output directory {cfg.output_dir!r}: {e}") from None
    if not os.access(cfg.output_dir, os.W_OK):
        raise UsageError(f"output directory {cfg.output_dir!r} is not writable")
    return cfg.output_dir


def provenance(cfg: ExperimentConfig, citation: str) -> str:
    return f"seed={cfg.master_seed} config_hash={cfg.config_hash()} citation={citation}"


def _log(cfg: ExperimentConfig, message: str) -> None:
    """Timestamps live only in this sidecar log, never in data files."""
    stamp = datetime.datetime.now().isoformat(timespec="seconds")
    with open(os.path.join(cfg.output_dir, "run.log"), "a") as fh:
        fh.write(f"{stamp} {message}\n")


# --- simulate / dump -------------------------------------------------------------------------

def _simulate_path(kind: str, n: int, rng: RngStream, horizon: float) -> pathsim.DiscretePath:
    if kind == "motion":
        return pathsim.sample_bm(rng, horizon, n)
    if kind == "bridge":
        return pathsim.sample_bridge(rng, horizon, 0.0, n)
    if kind == "bes3":
        return pathsim.sample_bes3(rng, horizon, 0.0, n)
    if kind == "bes3_bridge":
        return pathsim.sample_bes3_bridge(rng, horizon, 0.0, n)
    if kind == "excursion":
        return pathsim.sample_excursion(rng, horizon, n)
    if kind == "meander":
        return pathsim.sample_meander(rng, horizon, n)
    if kind == "first_passage":
        return pathsim.sample_first_passage(rng, horizon, n)
    raise UsageError(f"unknown kind {kind!r}")


def _write_path(cfg, p: pathsim.DiscretePath, name: str) -> str:
    path = os.path.join(_outdir(cfg), name)
    p.dump_csv(path, provenance(cfg, CITATIONS["path"]))
    return path


def cmd_simulate(args, cfg) -> int:
    rng = RngStream(cfg.master_seed).child("simulate", args.kind)
    p = _simulate_path(args.kind, args.n, rng, cfg.horizon)
    path = _write_path(cfg, p, f"simulate_{args.kind}_{args.n}.csv")
    faces = hull.convex_minorant(p)
    fpath = os.path.join(cfg.output_dir, f"simulate_{args.kind}_{args.n}_faces.csv")
    faces.dump_csv(fpath, provenance(cfg, CITATIONS["faces"]))
    _log(cfg, f"simulate kind={args.kind} n={args.n} -> {path}")
    print(path)
    print(fpath)
    return EXIT_OK


def _curve_params(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"--param expects name=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            val = float(v)
        except ValueError:
            raise UsageError(f"--param {k}: not a number: {v!r}") from None
        out[k] = int(val) if k == "n" else val
    return out


def write_curve(cfg, name: str, grid: int, params: dict) -> str:
    try:
        c = analytic.curve(name, **params)
    except KeyError as e:
        raise UsageError(str(e.args[0])) from None
    x, y = c.tabulate(grid)
    suffix = "".join(f"_{k}{params[k]:g}" for k in sorted(params))
    path = os.path.join(_outdir(cfg), f"curve_{name}{suffix}_{grid}.csv")
    with open(path, "w", newline="") as fh:
        fh.write(f"# {provenance(cfg, CITATIONS['curve'])} curve={name} support={c.support!r}\n")
        w = csv.writer(fh)
        w.writerow(["x", "value"])
        for a, b in zip(x, np.atleast_1d(y)):
            w.writerow([repr(float(a)), repr(float(b))])
    return path


def cmd_density(args, cfg) -> int:
    path = write_curve(cfg, args.curve, args.grid, _curve_params(args.param))
    _log(cfg, f"density curve={args.curve} grid={args.grid} -> {path}")
    print(path)
    return EXIT_OK


def cmd_dump(args, cfg) -> int:
    what = args.what
    rng = RngStream(cfg.master_seed).child("dump", what)
    out = _outdir(cfg)
    if what == "path":
        path = _write_path(cfg, _simulate_path(args.kind, args.n, rng, cfg.horizon), f"dump_path_{args.kind}.csv")
    elif what == "faces":
        p = _simulate_path(args.kind, args.n, rng, cfg.horizon)
        path = os.path.join(out, f"dump_faces_{args.kind}.csv")
        hull.convex_minorant(p).dump_csv(path, provenance(cfg, CITATIONS["faces"]))
    elif what == "points":
        s = pointproc.sample_face_process(rng, window=cfg.slope_window, theta=args.theta,
                                          length_floor=0.0)
        order = np.argsort(s.slopes, kind="stable")
        s = pointproc.FaceProcessSample(s.lengths[order], s.slopes[order], s.window)
        path = os.path.join(out, "dump_points.csv")
        s.dump_csv(path, provenance(cfg, CITATIONS["points"]))
    elif what == "trajectory":
        traj = taurho.sample_trajectory(rng, args.init, cfg.chain_length, t=cfg.horizon)
        path = os.path.join(out, f"dump_trajectory_{args.init}.csv")
        traj.dump_csv(path, provenance(cfg, CITATIONS["trajectory"]) + f" init={args.init}")
    elif what == "curve":
        path = write_curve(cfg, args.curve, args.grid, _curve_params(args.param))
    else:
        raise UsageError(f"unknown dump target {what!r}")
    _log(cfg, f"dump what={what} -> {path}")
    print(path)
    return EXIT_OK


# --- verify / identity / report --------------------------------------------------------------

def _write_reports(cfg, reports, tag: str) -> None:
    out = _outdir(cfg)
    for r in reports:
        r.extra["config"] = {k: v for k, v in cfg.as_dict().items() if k != "output_dir"}
        r.extra["config_hash"] = cfg.config_hash()
        slug = r.name.split()[0] if r.name.startswith("C") else r.name.replace(" ", "_")
        with open(os.path.join(out, f"report_{slug}.json"), "w") as fh:
            json.dump(_strip_timing(r.to_dict()), fh, indent=2, sort_keys=True)
            fh.write("\n")
    write_summary_csv(reports, os.path.join(out, f"summary_{tag}.csv"))
    cfg.save(os.path.join(out, "effective_config.txt"))


def _strip_timing(d: dict) -> dict:
    """Wall-clock values go to run.log so report files stay reproducible."""
    d = dict(d)
    extra = dict(d.get("extra", {}))
    extra.pop("seconds", None)
    d["extra"] = extra
    if "runtime" in d.get("flags", []):
        d["statistic"] = None
    d["details"] = [_strip_timing(x) for x in d.get("details", [])]
    return d


def _print_reports(reports) -> None:
    for r in reports:
        print(r.line())
        for d in r.details:
            print("    " + d.line())
    n_stat = sum(len(r.details) for r in reports)
    print(f"{sum(r.passed for r in reports)}/{len(reports)} checks passed "
          f"({n_stat} individual tests; at p-floor 0.01 about {0.01 * n_stat:.1f} false alarms expected)")


def cmd_verify(args, cfg) -> int:
    if args.suite not in verify.SUITES:
        raise UsageError(f"unknown suite {args.suite!r}; expected one of {sorted(verify.SUITES)}")
    _outdir(cfg)
    _log(cfg, f"verify suite={args.suite} seed={cfg.master_seed} config_hash={cfg.config_hash()}")

    def log(rep):
        _log(cfg, f"{rep.line()} seconds={rep.extra.get('seconds')}")
        if not args.quiet:
            print(rep.line(), flush=True)

    reports = verify.run_checks(cfg, args.suite, log)
    _write_reports(cfg, reports, args.suite)
    if not args.quiet:
        print()
        _print_reports(reports)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def cmd_identity(args, cfg) -> int:
    if args.name not in verify.IDENTITIES:
        raise UsageError(f"unknown identity {args.name!r}; expected one of {sorted(verify.IDENTITIES)}")
    _outdir(cfg)
    rep = verify.check_identity(cfg, args.name)
    _log(cfg, f"{rep.line()} seconds={rep.extra.get('seconds')}")
    _write_reports(cfg, [rep], f"identity_{args.name}")
    _print_reports([rep])
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_report(args, cfg) -> int:
    files = sorted(glob.glob(os.path.join(cfg.output_dir, "report_*.json")))
    if not files:
        raise UsageError(f"no reports found in {cfg.output_dir!r}")
    reports = []
    for f in files:
        with open(f) as fh:
            reports.append(TestReport.from_dict(json.load(fh)))
    _print_reports(reports)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


# --- parser ------------------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file; flags override it")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--replicas", type=int, help="override the sample size of every check")
    p.add_argument("--grid-n", dest="grid_n", type=int, help="override simulation grid sizes")
    p.add_argument("--chain-length", dest="chain_length", type=int)
    p.add_argument("--workers", type=int, help="worker processes for sharded simulations")
    p.add_argument("--out", help="output directory (default: $MINORANT_OUTPUT_DIR or ./minorant_out)")
    p.add_argument("--tol", action="append", metavar="NAME=VALUE", help="tolerance override (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="minorant", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate one path and its minorant faces")
    _common(p)
    p.add_argument("--kind", choices=pathsim.KINDS, default="motion")
    p.add_argument("--n", type=int, default=1024, help="grid steps")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run an acceptance suite")
    _common(p)
    p.add_argument("--suite", default="all", help=f"one of {', '.join(verify.SUITES)}")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("density", help="tabulate a closed-form curve")
    _common(p)
    p.add_argument("--curve", required=True, help=f"one of {', '.join(analytic.CURVE_NAMES)}")
    p.add_argument("--grid", type=int, default=99, help="number of interior points")
    p.add_argument("--param", action="append", metavar="NAME=VALUE", help="curve parameter (e.g. n=2)")
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("identity", help="Monte Carlo check of one distributional identity")
    _common(p)
    p.add_argument("--name", required=True, help=f"one of {', '.join(verify.IDENTITIES)}")
    p.set_defaults(func=cmd_identity)

    p = sub.add_parser("dump", help="write a CSV for plotting")
    _common(p)
    p.add_argument("what", choices=("path", "faces", "points", "trajectory", "curve"))
    p.add_argument("--kind", choices=pathsim.KINDS, default="motion")
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--init", choices=taurho.LABELS, default="meander_t")
    p.add_argument("--curve", default="bmzo")
    p.add_argument("--grid", type=int, default=99)
    p.add_argument("--param", action="append", metavar="NAME=VALUE")
    p.set_defaults(func=cmd_dump)

    p = sub.add_parser("report", help="summarize the reports in the output directory")
    _common(p)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv: Optional[list] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    try:
        cfg = build_config(args)
        for name in ("n", "grid"):
            v = getattr(args, name, None)
            if v is not None and v < 1:
                raise UsageError(f"--{name} must be positive")
        return args.func(args, cfg)
    except (UsageError, ConfigError, FileNotFoundError) as e:
        print(f"minorant: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
