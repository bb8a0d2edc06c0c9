#!/usr/bin/env python3
"""Insurer entry on two-type populations smoothed into small squares.

For each of ``configs/coverage_falls.cfg`` and ``configs/price_falls.cfg``
prints the no-insurance optimum, the subgame-perfect equilibrium and the
price and access effects of entry.
"""
import sys
from pathlib import Path

from rxgame.config import build_population, load_config
from rxgame.results import summary
from rxgame.solver import compare

ROOT = Path(__file__).resolve().parent.parent


def main():
    for name in ("coverage_falls", "price_falls"):
        pm = build_population(load_config(ROOT / "configs" / f"{name}.cfg"))
        rep = compare(pm)
        print(f"== {name}")
        print(summary(rep.baseline))
        print(summary(rep.with_insurer))
        print(f"  price effect {rep.price_effect:+.4f}, access effect {rep.access_effect:+.4f}, "
              f"producer gain {rep.producer_gain:+.4f}, insurer profit {rep.insurer_profit:.4f}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
