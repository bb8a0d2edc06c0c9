"""Parameter sweeps, the quadrature-versus-sampling check, and plot series."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from functools import partial

import numpy as np

from .distributions import (
    AtomMixture,
    Beta,
    BoxMixture,
    DomainError,
    Exponential,
    Pareto,
    PlanarAtoms,
    ProductMeasure,
)
from .population import classify_codes, masses_batch, mc_masses_batch
from .quadrature import QuadratureError
from .results import SweepRow
from .solver import SolverOptions, baseline, dictatorial, spne

SWEEP_PARAMS = ("lambda", "s1", "s2", "r")
KINDS = ("spne", "dictatorial", "baseline")


def vary(pm, param: str, value: float):
    """Population with one parameter replaced.

    ``lambda`` is the exponential rate of psi, ``s1`` the first Beta shape of
    p, ``s2`` the Pareto shape of psi (or the second Beta shape of p when psi
    is not Pareto), and ``r`` the incidence.
    """
    value = float(value)
    if param == "r":
        return pm.with_r(value)
    if not isinstance(pm, ProductMeasure):
        raise DomainError(f"sweeping {param!r} needs a product population")
    if param == "lambda":
        if not isinstance(pm.mu_psi, Exponential):
            raise DomainError("sweeping lambda needs mu_psi = exp(...)")
        return replace(pm, mu_psi=Exponential(value))
    if param == "s1":
        if not isinstance(pm.mu_p, Beta):
            raise DomainError("sweeping s1 needs mu_p = beta(...)")
        return replace(pm, mu_p=Beta(value, pm.mu_p.s2))
    if param == "s2":
        if isinstance(pm.mu_psi, Pareto):
            return replace(pm, mu_psi=Pareto(pm.mu_psi.scale, value))
        if isinstance(pm.mu_p, Beta):
            return replace(pm, mu_p=Beta(pm.mu_p.s1, value))
        raise DomainError("sweeping s2 needs mu_psi = pareto(...) or mu_p = beta(...)")
    raise DomainError(f"unknown sweep parameter {param!r}; expected one of {', '.join(SWEEP_PARAMS)}")


def solve(pm, kind: str, opts: SolverOptions):
    if kind == "spne":
        return spne(pm, opts)
    if kind == "dictatorial":
        return dictatorial(pm, opts)
    if kind == "baseline":
        return baseline(pm, opts)
    raise DomainError(f"unknown equilibrium kind {kind!r}; expected one of {', '.join(KINDS)}")


def _sweep_point(pm, param, kind, opts, value):
    try:
        res = solve(vary(pm, param, value), kind, opts)
    except (DomainError, QuadratureError, FloatingPointError) as exc:
        return SweepRow.failed(value), {"param": value, "error": f"{type(exc).__name__}: {exc}"}
    # full-precision values; the CSV row keeps 6 significant digits
    exact = {"theta": res.theta, "premium": res.premium,
             "producer_profit": res.profits.producer, "insurer_profit": res.profits.insurer}
    diag = {"param": value, "kind": res.kind.value, "exact": exact, **res.diagnostics}
    return SweepRow.from_result(value, res), diag


def sweep(pm, param, values, kind="spne", opts=None, workers=1):
    """One row per value, in input order; failures become NaN rows with a diagnostic."""
    opts = opts or SolverOptions()
    values = [float(v) for v in values]
    if not values or not all(math.isfinite(v) for v in values):
        raise DomainError("sweep values must be a nonempty list of finite numbers")
    if param not in SWEEP_PARAMS:
        raise DomainError(f"unknown sweep parameter {param!r}; expected one of {', '.join(SWEEP_PARAMS)}")
    task = partial(_sweep_point, pm, param, kind, opts)
    if workers > 1 and len(values) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(task, values))  # map keeps input order
    else:
        out = [task(v) for v in values]
    return [o[0] for o in out], [o[1] for o in out]


# -- oracle ----------------------------------------------------------------------------------------

DEFAULT_THETA_LEVELS = (0.2, 0.35, 0.5, 0.65, 0.8)
DEFAULT_PREMIUM_FRACTIONS = (0.1, 0.3, 0.5, 0.7, 0.9)


def default_price_grid(pm, theta_levels=DEFAULT_THETA_LEVELS, fractions=DEFAULT_PREMIUM_FRACTIONS):
    """Prices at psi-quantiles, premiums at fractions of the strip [theta r, theta]."""
    thetas = np.asarray(pm.psi_marginal.quantile(np.asarray(theta_levels)), dtype=float)
    th, fr = np.meshgrid(thetas, np.asarray(fractions, dtype=float), indexing="ij")
    return th.ravel(), (th * (pm.r + (1 - pm.r) * fr)).ravel()


def _is_discrete(pm):
    return isinstance(pm, PlanarAtoms) or (
        isinstance(pm, ProductMeasure) and isinstance(pm.mu_p, AtomMixture) and isinstance(pm.mu_psi, AtomMixture)
    )


def _enumerate(pm, theta, premium):
    """Exact expectation of the classifier over a finite support."""
    if isinstance(pm, PlanarAtoms):
        p, psi, w = pm.p, pm.psi, pm.weights
    else:
        pp, wp = pm.mu_p.locations, pm.mu_p.weights
        ps, ws = pm.mu_psi.locations, pm.mu_psi.weights
        p, psi = np.repeat(pp, ps.size), np.tile(ps, pp.size)
        w = np.repeat(wp, ps.size) * np.tile(ws, pp.size)
    out = np.empty((theta.size, 3))
    for i, (th, q) in enumerate(zip(theta, premium)):
        codes = classify_codes(p, psi, th, q)
        out[i] = [w[codes == k].sum() for k in range(3)]
    return out


def oracle_table(pm, theta, premium, n=1_000_000, seed=12345):
    """Quadrature masses against an independent estimate at each price pair.

    Finite populations are checked by exact enumeration of the support;
    others by ``n`` shared Monte Carlo draws.  Deviations are in units of
    the binomial standard error sqrt(q (1 - q) / n) of the quadrature value q.
    """
    theta = np.asarray(theta, dtype=float)
    premium = np.asarray(premium, dtype=float)
    a, t, o, _ = masses_batch(pm, theta, premium)
    quad = np.stack([a, t, o], axis=1)
    if _is_discrete(pm):
        method = "enumeration"
        other = _enumerate(pm, theta, premium)
        sigma = np.zeros_like(quad)
    else:
        method = "monte_carlo"
        other = mc_masses_batch(pm, theta, premium, n, seed)
        sigma = np.sqrt(np.clip(quad * (1 - quad), 0, None) / n)
    diff = np.abs(quad - other)
    with np.errstate(divide="ignore", invalid="ignore"):
        dev = np.where(sigma > 0, diff / sigma, np.where(diff == 0, 0.0, np.inf))
    rows = []
    for i in range(theta.size):
        rows.append({
            "theta": theta[i], "premium": premium[i],
            "a": quad[i, 0], "t": quad[i, 1], "o": quad[i, 2],
            "a_check": other[i, 0], "t_check": other[i, 1], "o_check": other[i, 2],
            "max_dev_sigma": float(dev[i].max()),
        })
    return rows, method


ORACLE_COLUMNS = ("theta", "premium", "a", "t", "o", "a_check", "t_check", "o_check", "max_dev_sigma")


# -- plot data ----------------------------------------------------------------------------------------

def plot_series(rows, param="param"):
    """Three figure series from a sweep: equilibrium locus, shares, profits."""
    x = [r.param for r in rows]

    def col(name):
        return [getattr(r, name) for r in rows]

    return {
        "param": param,
        "locus": {"x": x, "theta": col("theta"), "premium": col("premium")},
        "shares": {"x": x, "a": col("a"), "t": col("t"), "o": col("o")},
        "profits": {"x": x, "p_i": col("p_i"), "p_p": col("p_p")},
    }


def population_label(pm) -> str:
    if isinstance(pm, ProductMeasure):
        return f"{pm.mu_p!r} x {pm.mu_psi!r}, r={pm.r}"
    if isinstance(pm, BoxMixture):
        return f"{len(pm.boxes)} smoothed atoms (radius {pm.radius}), r={pm.r}"
    return f"{len(pm.points)} atoms, r={pm.r}"
