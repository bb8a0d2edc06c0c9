"""JSON and CSV forms of solver output.  Field names are listed in docs/format.md."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, fields

from .solver import ComparisonReport, EquilibriumResult

SWEEP_COLUMNS = ("param", "theta", "premium", "a", "t", "o", "p_i", "p_p")
RESULT_COLUMNS = ("kind",) + SWEEP_COLUMNS[1:]


def sig6(x: float) -> float:
    """Round to the 6 significant digits written to CSV."""
    return float(f"{x:.6g}")


def fmt(x: float) -> str:
    return f"{x:.6g}"


@dataclass(frozen=True)
class SweepRow:
    param: float
    theta: float
    premium: float
    a: float
    t: float
    o: float
    p_i: float
    p_p: float

    @classmethod
    def from_result(cls, param, res: EquilibriumResult):
        return cls(*(sig6(v) for v in (
            param, res.theta, res.premium, res.masses.a, res.masses.t, res.masses.o,
            res.profits.insurer, res.profits.producer,
        )))

    @classmethod
    def failed(cls, param):
        return cls(sig6(param), *([math.nan] * 7))

    def values(self):
        return tuple(getattr(self, f.name) for f in fields(self))


def write_sweep_csv(rows, fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for row in rows:
        writer.writerow([fmt(v) for v in row.values()])


def read_sweep_csv(fh):
    reader = csv.reader(fh)
    header = next(reader, None)
    if tuple(header or ()) != SWEEP_COLUMNS:
        raise ValueError(f"not a sweep table: header {header!r}")
    return [SweepRow(*(float(v) for v in line)) for line in reader if line]


def sweep_csv_text(rows) -> str:
    buf = io.StringIO()
    write_sweep_csv(rows, buf)
    return buf.getvalue()


def _num(x):
    """JSON-safe number: NoEntry and NaN become null."""
    return x if isinstance(x, float) and math.isfinite(x) else (None if isinstance(x, float) else x)


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        return _num(obj)
    try:
        return _num(float(obj))
    except (TypeError, ValueError):
        return str(obj)


def result_to_dict(res: EquilibriumResult) -> dict:
    return _clean({
        "kind": res.kind.value,
        "theta": res.theta,
        "premium": res.premium,
        "insurer_enters": math.isfinite(res.premium),
        "masses": {"a": res.masses.a, "t": res.masses.t, "o": res.masses.o,
                   "on_boundary": res.masses.on_boundary},
        "profits": {"producer": res.profits.producer, "insurer": res.profits.insurer},
        "candidates": [
            {"theta": c.theta, "premium": c.premium, "producer": c.producer, "insurer": c.insurer}
            for c in res.candidates
        ],
        "diagnostics": res.diagnostics,
    })


def comparison_to_dict(rep: ComparisonReport) -> dict:
    return _clean({
        "baseline": result_to_dict(rep.baseline),
        "with_insurer": result_to_dict(rep.with_insurer),
        "price_effect": rep.price_effect,
        "access_effect": rep.access_effect,
        "producer_gain": rep.producer_gain,
        "insurer_profit": rep.insurer_profit,
    })


def result_csv_text(res: EquilibriumResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RESULT_COLUMNS)
    writer.writerow([res.kind.value] + [fmt(v) for v in (
        res.theta, res.premium, res.masses.a, res.masses.t, res.masses.o,
        res.profits.insurer, res.profits.producer,
    )])
    return buf.getvalue()


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, allow_nan=False) + "\n"


def summary(res: EquilibriumResult) -> str:
    prem = f"{res.premium:.6g}" if math.isfinite(res.premium) else "NoEntry"
    lines = [
        f"{res.kind.value}: theta = {res.theta:.6g}, premium = {prem}",
        f"  insure A = {res.masses.a:.6g}, treat T = {res.masses.t:.6g}, no access O = {res.masses.o:.6g}",
        f"  producer profit = {res.profits.producer:.6g}, insurer profit = {res.profits.insurer:.6g}",
    ]
    for w in res.diagnostics.get("warnings", []):
        lines.append(f"  warning: {w}")
    return "\n".join(lines)
