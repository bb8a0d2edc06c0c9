"""Command-line entry point: ``rxgame <solve|sweep|oracle|lifecycle|plotdata>``.

Exit status is 0 on success, 1 for usage or configuration errors and 2
when a numerical routine fails.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, build_population, load_config
from .distributions import DomainError, psi_scale, smooth_atoms
from .experiments import (
    KINDS,
    ORACLE_COLUMNS,
    SWEEP_PARAMS,
    default_price_grid,
    oracle_table,
    plot_series,
    population_label,
    solve,
    sweep,
)
from .lifecycle import random_agent, read_cohort, reduce_cohort
from .quadrature import QuadratureError
from .results import dumps, fmt, read_sweep_csv, result_csv_text, result_to_dict, summary, sweep_csv_text
from .solver import SolverOptions, spne

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class NumericError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _seed(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an unsigned integer, got {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def build_parser():
    parser = _Parser(prog="rxgame", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="experiment file (key = value with [sections])")
        p.add_argument("--out", help="output path; printed to stdout when omitted")

    def grid(p):
        p.add_argument("--grid", type=_positive_int, help="points in the price and premium grids (default 512)")

    p = sub.add_parser("solve", help="compute one equilibrium")
    common(p)
    grid(p)
    p.add_argument("--kind", choices=KINDS, help="equilibrium type (default: [solve] kind or spne)")

    p = sub.add_parser("sweep", help="equilibria along one parameter")
    common(p)
    grid(p)
    p.add_argument("--kind", choices=KINDS, help="equilibrium type (default: [sweep] kind or spne)")
    p.add_argument("--workers", type=_positive_int, default=1, help="worker processes")

    p = sub.add_parser("oracle", help="quadrature masses against Monte Carlo")
    common(p)
    p.add_argument("--seed", type=_seed, help="random seed (default: [oracle] seed or 12345)")
    p.add_argument("--mc-n", type=_positive_int, help="Monte Carlo draws (default 1000000)")

    p = sub.add_parser("lifecycle", help="reduce a cohort to (p, psi) atoms")
    common(p)
    grid(p)
    p.add_argument("--solve", action="store_true", help="smooth the atoms and compute the equilibrium")
    p.add_argument("--radius", type=_positive_float, help="smoothing radius (default 1e-3 * median psi)")
    p.add_argument("--seed", type=_seed, help="seed for a generated cohort")

    p = sub.add_parser("plotdata", help="figure series from a sweep table")
    p.add_argument("sweep_csv", help="CSV written by the sweep command")
    p.add_argument("--out", help="output path; printed to stdout when omitted")
    return parser


def _emit(text, out, suffix=None):
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    if suffix is not None:
        path = path.with_suffix(suffix)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _options(cfg, section, args):
    sec = cfg.section(section)
    grid_n = getattr(args, "grid", None) or sec.get("grid")
    kw = {}
    if grid_n is not None:
        kw["theta_grid"] = kw["premium_grid"] = int(grid_n)
    for key in ("premium_grid", "theta_grid", "local_brackets", "inner_brackets"):
        if key in sec and not getattr(args, "grid", None):
            kw[key] = int(sec[key])
    if "theta_max" in sec:
        kw["theta_max"] = float(sec["theta_max"])
    try:
        return SolverOptions(**kw)
    except DomainError as exc:
        raise UsageError(str(exc)) from None


def _population(cfg):
    try:
        return build_population(cfg)
    except DomainError as exc:  # construction errors not already tied to a key
        raise UsageError(str(exc)) from None


def cmd_solve(args):
    cfg = load_config(args.config)
    pm = _population(cfg)
    kind = args.kind or cfg.get("solve", "kind", "spne")
    if kind not in KINDS:
        raise cfg.error("solve", "kind", f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}")
    opts = _options(cfg, "solve", args)
    res = _numeric(lambda: solve(pm, kind, opts))
    print(summary(res), file=sys.stderr if args.out is None else sys.stdout)
    doc = {"population": population_label(pm), "result": result_to_dict(res)}
    if args.out is None:
        sys.stdout.write(dumps(doc))
    else:
        _emit(dumps(doc), args.out, ".json")
        _emit(result_csv_text(res), args.out, ".csv")
    return EXIT_OK


def cmd_sweep(args):
    cfg = load_config(args.config)
    pm = _population(cfg)
    sec = cfg.section("sweep")
    param = sec.get("param")
    if param not in SWEEP_PARAMS:
        raise cfg.error("sweep", "param", f"sweep param must be one of {', '.join(SWEEP_PARAMS)}, got {param!r}")
    values = sec.get("values")
    if not isinstance(values, (list, tuple)) or not values or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) and np.isfinite(v) for v in values
    ):
        raise cfg.error("sweep", "values", "values must be a nonempty list of finite numbers")
    kind = args.kind or sec.get("kind", "spne")
    if kind not in KINDS:
        raise cfg.error("sweep", "kind", f"unknown kind {kind!r}")
    opts = _options(cfg, "sweep", args)
    rows, diags = sweep(pm, param, values, kind, opts, workers=args.workers)
    for d in diags:
        if "error" in d:
            print(f"warning: {param}={d['param']:g} failed: {d['error']}", file=sys.stderr)
    _emit(sweep_csv_text(rows), args.out)
    if args.out is not None:
        meta = {"param": param, "kind": kind, "population": population_label(pm), "points": diags}
        _emit(dumps(meta), args.out, ".json")
    return EXIT_NUMERIC if all("error" in d for d in diags) else EXIT_OK


def cmd_oracle(args):
    cfg = load_config(args.config)
    pm = _population(cfg)
    sec = cfg.section("oracle")
    seed = args.seed if args.seed is not None else int(sec.get("seed", 12345))
    n = args.mc_n or int(sec.get("n", 1_000_000))
    if "theta" in sec:
        theta = np.asarray(sec["theta"], dtype=float)
        frac = np.asarray(sec.get("premium_fraction", [0.1, 0.3, 0.5, 0.7, 0.9]), dtype=float)
        th, fr = np.meshgrid(theta, frac, indexing="ij")
        theta, premium = th.ravel(), (th * (pm.r + (1 - pm.r) * fr)).ravel()
    else:
        theta, premium = default_price_grid(pm)
    rows, method = _numeric(lambda: oracle_table(pm, theta, premium, n=n, seed=seed))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ORACLE_COLUMNS)
    for row in rows:
        writer.writerow([fmt(row[c]) for c in ORACLE_COLUMNS])
    _emit(buf.getvalue(), args.out)
    worst = max(r["max_dev_sigma"] for r in rows)
    print(f"{method}: {len(rows)} price pairs, max deviation {worst:.3g} sigma (n={n}, seed={seed})", file=sys.stderr)
    return EXIT_OK


def cmd_lifecycle(args):
    cfg = load_config(args.config)
    sec = cfg.section("lifecycle")
    r = sec.get("r", cfg.get("population", "r"))
    if r is None:
        raise ConfigError("missing incidence 'r' in [lifecycle] or [population]", source=cfg.source)
    period = int(sec.get("period", 0))
    try:
        if "cohort" in sec:
            path = Path(str(sec["cohort"]))
            if not path.is_absolute():
                path = Path(args.config).resolve().parent / path
            agents = read_cohort(path)
        else:
            seed = args.seed if args.seed is not None else int(sec.get("seed", 0))
            rng = np.random.default_rng(seed)
            horizon = sec.get("horizon", 40)
            agents = [random_agent(rng, horizon) for _ in range(int(sec.get("n", 100)))]
        atoms = reduce_cohort(agents, period, float(r))
    except (OSError, DomainError) as exc:
        raise UsageError(str(exc)) from None
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("p", "psi", "weight"))
    for p, s, w in atoms.points:
        writer.writerow((repr(p), repr(s), repr(w)))
    _emit(buf.getvalue(), args.out)
    print(f"{len(agents)} agents reduced to {len(atoms.points)} atoms at period {period}", file=sys.stderr)
    if args.solve:
        if not atoms.positive_psi_mass() > 0:
            print("error: no agent has a positive reservation price; the profit-potential assumption fails "
                  "and no equilibrium search is possible", file=sys.stderr)
            return EXIT_NUMERIC
        radius = args.radius or float(sec.get("radius", 1e-3 * psi_scale(atoms)))
        try:
            smoothed = smooth_atoms(atoms, radius)
        except DomainError as exc:
            raise UsageError(str(exc)) from None
        res = _numeric(lambda: spne(smoothed, _options(cfg, "lifecycle", args)))
        print(summary(res), file=sys.stderr)
        if args.out is not None:
            _emit(dumps({"radius": radius, "result": result_to_dict(res)}), args.out, ".json")
    return EXIT_OK


def cmd_plotdata(args):
    path = Path(args.sweep_csv)
    try:
        with open(path, newline="") as fh:
            rows = read_sweep_csv(fh)
    except OSError as exc:
        raise UsageError(f"cannot read sweep table {path}: {exc.strerror}") from None
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None
    param = "param"
    meta = path.with_suffix(".json")
    if meta.exists():
        try:
            param = json.loads(meta.read_text()).get("param", param)
        except json.JSONDecodeError:
            pass
    _emit(dumps(plot_series(rows, param)), args.out)
    return EXIT_OK


def _numeric(fn):
    try:
        with np.errstate(all="ignore"):
            return fn()
    except (QuadratureError, FloatingPointError, DomainError) as exc:
        raise NumericError(f"{type(exc).__name__}: {exc}") from None


COMMANDS = {
    "solve": cmd_solve, "sweep": cmd_sweep, "oracle": cmd_oracle,
    "lifecycle": cmd_lifecycle, "plotdata": cmd_plotdata,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)  # surfaced through diagnostics instead
            return COMMANDS[args.command](args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except BrokenPipeError:
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
