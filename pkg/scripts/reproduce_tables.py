#!/usr/bin/env python3
"""Run the four reference sweeps and print each cell next to its reference value.

Writes ``<out>/<name>.csv`` (sweep table), ``<name>.json`` (sidecar) and
``<name>_plot.json`` (figure series) for every ``configs/table*.cfg``.
Cells outside tolerance are marked with ``*``.
"""
import argparse
import sys
import time
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

from reference_tables import COLUMNS, PRICE_TOL, TABLE1, TABLE2, TABLE3, TABLE4, VALUE_TOL  # noqa: E402

from rxgame.config import build_population, load_config  # noqa: E402
from rxgame.experiments import plot_series, population_label, sweep  # noqa: E402
from rxgame.results import dumps, sweep_csv_text  # noqa: E402
from rxgame.solver import SolverOptions  # noqa: E402

REFERENCE = {
    "table1_lambda": TABLE1,
    "table2_s1": TABLE2,
    "table3_dictatorial": TABLE3,
    "table4_pareto": TABLE4,
}


def show(name, rows, reference, seconds):
    print(f"\n{name}  ({seconds:.1f} s)")
    print("  ".join(f"{c:>16}" for c in COLUMNS))
    off = 0
    for row, ref in zip(rows, reference):
        cells = [f"{row.param:>16g}"]
        for k, col in enumerate(COLUMNS[1:]):
            got, want = getattr(row, col), ref[k + 1]
            tol = PRICE_TOL if k < 2 else VALUE_TOL
            bad = not abs(got - want) <= tol
            off += bad
            cells.append(f"{got:7.4f}/{want:5.3f}{'*' if bad else ' ':>2}")
        print("  ".join(cells))
    print(f"cells outside tolerance: {off}")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(ROOT / "results"), help="output directory")
    ap.add_argument("--grid", type=int, default=512, help="price and premium grid size")
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    opts = SolverOptions(theta_grid=args.grid, premium_grid=args.grid)
    for name, reference in REFERENCE.items():
        cfg = load_config(ROOT / "configs" / f"{name}.cfg")
        pm = build_population(cfg)
        sec = cfg.section("sweep")
        start = time.perf_counter()
        rows, diags = sweep(pm, sec["param"], sec["values"], sec.get("kind", "spne"), opts)
        seconds = time.perf_counter() - start
        (out / f"{name}.csv").write_text(sweep_csv_text(rows))
        meta = {"param": sec["param"], "kind": sec.get("kind", "spne"), "population": population_label(pm), "points": diags}
        (out / f"{name}.json").write_text(dumps(meta))
        (out / f"{name}_plot.json").write_text(dumps(plot_series(rows, sec["param"])))
        show(name, rows, reference, seconds)
    return 0


if __name__ == "__main__":
    sys.exit(main())
