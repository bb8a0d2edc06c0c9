"""Insurer best responses and equilibrium searches.

The producer moves first with a price ``theta``; the insurer answers with the
premium maximising its profit on ``[theta * r, theta]`` or stays out.  Every
search below follows the same pattern: a coarse grid, the best few discrete
local maxima as brackets, vectorised golden-section refinement, and for
product densities a root-find on the semi-analytic premium derivative.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .distributions import (
    AtomMixture,
    BoxMixture,
    DomainError,
    Pareto,
    PlanarAtoms,
    ProductMeasure,
    psi_scale,
)
from .payoffs import ProfitPair, no_insurer_profit, profits_from_masses
from .population import NO_ENTRY, PricePair, RegionMasses, insured_slope_batch, masses_batch
from .search import golden_max_batch, illinois_root_batch, local_max_indices, parabolic_vertex

TIE_RTOL = 1e-12


class PreconditionError(DomainError):
    """The population form is not accepted by this solver."""


class ProfitPotentialError(DomainError):
    """No agent has a positive reservation price, so no price earns anything."""


class Kind(str, enum.Enum):
    SPNE = "SubgamePerfect"
    DICTATORIAL = "Dictatorial"
    BASELINE = "NoInsuranceBaseline"


@dataclass(frozen=True)
class SolverOptions:
    premium_grid: int = 512
    theta_grid: int = 512
    local_brackets: int = 5
    inner_brackets: int = 3
    theta_rtol: float = 1e-9
    premium_rtol: float = 1e-10
    quad_atol: float = 1e-10
    theta_max: float | None = None
    tail_rtol: float = 1e-6  # neglected producer profit beyond theta_max, relative
    participation_tol: float = 1e-9
    polish: bool = True

    def __post_init__(self):
        if self.premium_grid < 3 or self.theta_grid < 3:
            raise DomainError("grids need at least 3 points")
        if self.local_brackets < 1 or self.inner_brackets < 1:
            raise DomainError("at least one bracket must be refined")


@dataclass(frozen=True)
class BestResponse:
    premium: float
    insurer_profit: float
    is_interior: bool
    stationarity_residual: float

    @property
    def entered(self):
        return math.isfinite(self.premium)


@dataclass(frozen=True)
class Candidate:
    theta: float
    premium: float
    producer: float
    insurer: float


@dataclass(frozen=True)
class EquilibriumResult:
    kind: Kind
    theta: float
    premium: float
    masses: RegionMasses
    profits: ProfitPair
    candidates: tuple = ()
    diagnostics: dict = field(default_factory=dict)

    @property
    def prices(self):
        return PricePair(self.theta, self.premium)


@dataclass(frozen=True)
class ComparisonReport:
    baseline: EquilibriumResult
    with_insurer: EquilibriumResult
    price_effect: float
    access_effect: float
    producer_gain: float
    insurer_profit: float


# -- population checks ------------------------------------------------------------

def _is_atomic(pm):
    if isinstance(pm, PlanarAtoms):
        return True
    return isinstance(pm, ProductMeasure) and (
        isinstance(pm.mu_p, AtomMixture) or isinstance(pm.mu_psi, AtomMixture)
    )


def _require_density(pm):
    if _is_atomic(pm):
        raise PreconditionError(
            "equilibrium search needs a population with a density; "
            "smooth atomic populations first with smooth_atoms(pm, radius)"
        )


def _require_profit_potential(pm):
    if not pm.positive_psi_mass() > 0:
        raise ProfitPotentialError(
            "no agent has a positive reservation price (mass of psi > 0 is zero); "
            "every price yields zero profit"
        )


def _infinite_psi_mean(pm):
    m = pm.psi_marginal
    return isinstance(m, Pareto) and m.shape <= 1


def _has_slope(pm):
    return (
        isinstance(pm, ProductMeasure)
        and pm.mu_p.has_density
        and pm.mu_psi.has_density
        and pm.mu_p.density_bounded(pm.r, 1.0)
    )


# -- insurer side -------------------------------------------------------------------

def _profit_grid(pm, theta, premium, atol):
    a, t, _, _ = masses_batch(pm, theta, premium, atol=atol)
    producer, insurer = profits_from_masses(theta, premium, a, t, pm.r)
    return producer, insurer, a


def _insurer_fn(pm, theta, atol):
    def f(q):
        return _profit_grid(pm, theta, q, atol)[1]
    return f


def _stationarity(pm, theta, premium, atol):
    """dP_i/dpremium = A + (premium - theta r) dA/dpremium."""
    a = masses_batch(pm, theta, premium, atol=atol)[0]
    slope = insured_slope_batch(pm, theta, premium, atol=atol)
    return a + (premium - theta * pm.r) * slope


def _fd_stationarity(pm, theta, premium, atol):
    h = 1e-6 * theta
    f = _insurer_fn(pm, theta, atol)
    return (f(premium + h) - f(premium - h)) / (2 * h)


def _best_premium(pm, theta, opts: SolverOptions, upper=None, refine=True):
    """Vectorised best response for an array of prices ``theta``.

    The premium is searched on ``[theta r, upper]`` (``upper`` defaults to
    ``theta``).  Returns ``(premium, insurer_profit)`` arrays;
    NoEntry is encoded as ``inf`` premium with zero profit.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    m = theta.size
    lo = theta * pm.r
    hi = theta.copy() if upper is None else np.atleast_1d(np.asarray(upper, dtype=float))
    G = opts.premium_grid
    u = np.linspace(0.0, 1.0, G)
    grid = lo[:, None] + (hi - lo)[:, None] * u[None, :]
    th_grid = np.broadcast_to(theta[:, None], grid.shape)
    _, vals, _ = _profit_grid(pm, th_grid, grid, opts.quad_atol)

    k = min(opts.inner_brackets, G)
    idx = local_max_indices(vals, k)  # (m, k)
    valid = idx >= 0
    safe = np.where(valid, idx, 0)
    rows = np.broadcast_to(np.arange(m)[:, None], idx.shape)
    left = grid[rows, np.maximum(safe - 1, 0)]
    mid = grid[rows, safe]
    right = grid[rows, np.minimum(safe + 1, G - 1)]
    th_k = np.broadcast_to(theta[:, None], idx.shape)

    sel = valid.ravel()
    th_s = th_k.ravel()[sel]
    lo_s, mid_s, hi_s = left.ravel()[sel], mid.ravel()[sel], right.ravel()[sel]
    f = _insurer_fn(pm, th_s, opts.quad_atol)
    if refine:
        tol = opts.premium_rtol * th_s
        polish = opts.polish and _has_slope(pm)
        # a derivative root-find follows, so golden section can stop early
        golden_tol = np.maximum(tol, 1e-7 * th_s) if polish else tol
        x, fx = golden_max_batch(f, lo_s, hi_s, golden_tol, x0=mid_s)
        if polish:
            x, fx = _polish(pm, th_s, x, fx, lo_s, hi_s, tol, opts)
    else:
        fl = vals[rows, np.maximum(safe - 1, 0)].ravel()[sel]
        fm = vals[rows, safe].ravel()[sel]
        fr = vals[rows, np.minimum(safe + 1, G - 1)].ravel()[sel]
        v = parabolic_vertex(lo_s, mid_s, hi_s, fl, fm, fr)
        fv = f(v)
        better = fv > fm
        x, fx = np.where(better, v, mid_s), np.where(better, fv, fm)

    cand_x = np.full(idx.shape, np.inf)
    cand_f = np.full(idx.shape, -np.inf)
    cand_x.ravel()[sel] = x
    cand_f.ravel()[sel] = fx
    premium, profit = _pick(cand_x, cand_f)

    no_entry = ~(profit > 0)
    premium = np.where(no_entry, NO_ENTRY, premium)
    profit = np.where(no_entry, 0.0, profit)
    return premium, profit


def _pick(cand_x, cand_f):
    """Row-wise best value; near-ties go to the smallest abscissa."""
    best = cand_f.max(axis=1)
    scale = np.maximum(np.abs(best), 1e-300)
    close = cand_f >= (best - TIE_RTOL * scale)[:, None]
    x = np.where(close, cand_x, np.inf).min(axis=1)
    fx = np.take_along_axis(cand_f, np.argmin(np.where(close, cand_x, np.inf), axis=1)[:, None], axis=1)[:, 0]
    return x, fx


def _polish(pm, theta, x, fx, lo, hi, tol, opts):
    """Refine golden-section maxima with a root of the premium derivative."""
    width = np.maximum(1e-5 * theta, 4 * tol)
    a = np.maximum(x - width, lo)
    b = np.minimum(x + width, hi)
    g = lambda q, th=theta: _stationarity(pm, th, q, opts.quad_atol)  # noqa: E731
    ga, gb = g(a), g(b)
    ok = (ga > 0) & (gb < 0)
    if not ok.any():
        return x, fx
    root = illinois_root_batch(
        lambda q: _stationarity(pm, theta[ok], q, opts.quad_atol),
        a[ok], b[ok], ga[ok], gb[ok], 1e-14 * theta[ok],
    )
    froot = _insurer_fn(pm, theta[ok], opts.quad_atol)(root)
    keep = froot >= fx[ok] - 1e-15
    x, fx = x.copy(), fx.copy()
    x[np.flatnonzero(ok)[keep]] = root[keep]
    fx[np.flatnonzero(ok)[keep]] = froot[keep]
    return x, fx


def _residual(pm, theta, premium, lo, hi, atol):
    theta = np.atleast_1d(theta)
    premium = np.atleast_1d(premium)
    out = np.zeros_like(theta)
    edge = 1e-9 * np.maximum(theta, 1.0)
    interior = np.isfinite(premium) & (premium > lo + edge) & (premium < hi - edge)
    if interior.any():
        fn = _stationarity if _has_slope(pm) else _fd_stationarity
        out[interior] = np.abs(fn(pm, theta[interior], premium[interior], atol))
    return out, interior


def best_response(pm, theta: float, opts: SolverOptions | None = None) -> BestResponse:
    """Insurer's profit-maximising premium against producer price ``theta``."""
    opts = opts or SolverOptions()
    if not theta > 0:
        raise DomainError(f"best response needs theta > 0, got {theta}")
    premium, profit = _best_premium(pm, np.array([theta]), opts)
    res, interior = _residual(pm, np.array([theta]), premium, theta * pm.r, theta, opts.quad_atol)
    return BestResponse(float(premium[0]), float(profit[0]), bool(interior[0]), float(res[0]))


# -- producer side --------------------------------------------------------------------

def _producer_values(pm, theta, opts, refine):
    """Producer profit against the insurer's best response, for an array of prices."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    premium, insurer = _best_premium(pm, theta, opts, refine=refine)
    producer, _, _ = _profit_grid(pm, theta, premium, opts.quad_atol)
    return producer, premium, insurer


def _theta_domain(pm, opts, tail_bound, incumbent):
    """Upper end of the price search and whether the neglected tail is certified small.

    Starts from the (1 - 1e-6)-quantile of psi divided by r and doubles until
    ``tail_bound(theta_max) <= tail_rtol * incumbent``.
    """
    eps = 1e-8 * psi_scale(pm)
    if opts.theta_max is not None:
        top = float(opts.theta_max)
        return eps, top, bool(tail_bound(top) <= opts.tail_rtol * incumbent), 0
    m = pm.psi_marginal
    top = float(m.quantile(1 - 1e-6)) / pm.r
    cap = 1e6 * psi_scale(pm)
    doublings = 0
    while tail_bound(top) > opts.tail_rtol * incumbent and top < cap:
        top *= 2.0
        doublings += 1
    top = min(top, cap)
    return eps, top, bool(tail_bound(top) <= opts.tail_rtol * incumbent), doublings


def _theta_grid(pm, lo, hi, n):
    if isinstance(pm.psi_marginal, Pareto):
        return np.geomspace(lo, hi, n)
    return np.linspace(lo, hi, n)


def _grid_then_refine(objective, grid, values, k, rtol):
    """Refine the ``k`` best discrete local maxima of ``values`` on ``grid``.

    ``objective(x)`` returns ``(value, premium, insurer)`` arrays.  Returns
    the refined ``(x, value, premium, insurer)`` per bracket, best first.
    """
    n = grid.size
    idx = local_max_indices(values[None, :], k)[0]
    idx = idx[idx >= 0]
    if idx.size == 0:
        return None
    lo = grid[np.maximum(idx - 1, 0)]
    hi = grid[np.minimum(idx + 1, n - 1)]
    x, _ = golden_max_batch(lambda t: objective(t)[0], lo, hi, rtol * grid[idx], x0=grid[idx])
    val, prem, ins = objective(x)
    return x, val, prem, ins


def _with_kinks(objective, pm, refined, lo, hi):
    """Append exact evaluations at prices where theta or theta r meets a psi breakpoint.

    Golden search reaches a kink maximum only to within its tolerance;
    evaluating the kink itself removes that slack.
    """
    b = np.asarray(pm.psi_marginal.breakpoints, dtype=float)
    pts = np.unique(np.concatenate([b, b / pm.r]))
    pts = pts[(pts > lo) & (pts < hi) & np.isfinite(pts)]
    if pts.size == 0:
        return refined
    extra = (pts,) + tuple(objective(pts))
    if refined is None:
        return extra
    return tuple(np.concatenate([r, e]) for r, e in zip(refined, extra))


def _select(x, val, prem):
    """Index of the best candidate; ties toward smaller theta, then smaller premium."""
    best = np.max(val)
    close = np.flatnonzero(val >= best - TIE_RTOL * max(abs(best), 1e-300))
    order = sorted(close, key=lambda i: (x[i], prem[i]))
    return order[0]


def _result(pm, kind, theta, premium, candidates, diagnostics, atol):
    a, t, o, edge = masses_batch(pm, theta, premium, atol=atol)
    masses = RegionMasses(float(a), float(t), float(o), float(edge))
    producer, insurer = profits_from_masses(theta, premium, a, t, pm.r)
    return EquilibriumResult(
        kind, float(theta), float(premium), masses, ProfitPair(float(producer), float(insurer)),
        tuple(candidates), diagnostics,
    )


def baseline(pm, opts: SolverOptions | None = None) -> EquilibriumResult:
    """Producer optimum when the insurer never enters: maximise theta r P[psi > theta]."""
    opts = opts or SolverOptions()
    _require_profit_potential(pm)
    objective = lambda t: no_insurer_profit(pm, t)  # noqa: E731
    psi_m = pm.psi_marginal
    start = float(psi_m.quantile(1 - 1e-6))
    # incumbent from a first pass on the bulk of the distribution
    probe = _theta_grid(pm, 1e-8 * psi_scale(pm), start, opts.theta_grid)
    incumbent = float(np.max(objective(probe)))
    lo, hi, certified, doublings = _theta_domain(
        pm, opts, lambda t: t * pm.r * psi_m.sf(t), incumbent
    )
    hi = max(hi * pm.r, start)  # this objective has no 1/r stretch
    grid = _theta_grid(pm, lo, hi, opts.theta_grid)
    vals = objective(grid)

    def wrapped(t):
        v = objective(t)
        return v, np.full_like(v, NO_ENTRY), np.zeros_like(v)

    refined = _grid_then_refine(wrapped, grid, vals, opts.local_brackets, opts.theta_rtol)
    x, val, prem, _ = _with_kinks(wrapped, pm, refined, lo, hi)
    i = _select(x, val, prem)
    cands = [Candidate(float(x[j]), NO_ENTRY, float(val[j]), 0.0) for j in range(x.size)]
    diag = {
        "theta_min": lo, "theta_max": hi, "theta_grid": opts.theta_grid,
        "tail_certified": certified, "domain_doublings": doublings,
        "non_certified": _infinite_psi_mean(pm),
    }
    return _result(pm, Kind.BASELINE, x[i], NO_ENTRY, cands, diag, opts.quad_atol)


def _heavy_tail_warning(pm, diag):
    if _infinite_psi_mean(pm):
        msg = "psi has an infinite mean; the search domain is truncated and the result is not certified"
        warnings.warn(msg, RuntimeWarning, stacklevel=3)
        diag["warnings"] = diag.get("warnings", []) + [msg]


def spne(pm, opts: SolverOptions | None = None, base: EquilibriumResult | None = None) -> EquilibriumResult:
    """Subgame-perfect equilibrium that maximises the producer's profit."""
    opts = opts or SolverOptions()
    _require_density(pm)
    _require_profit_potential(pm)
    base = base or baseline(pm, opts)
    psi_m = pm.psi_marginal
    # sandwich bound: P_p(theta, .) <= theta r P[psi > theta r]
    lo, hi, certified, doublings = _theta_domain(
        pm, opts, lambda t: t * pm.r * psi_m.sf(t * pm.r), base.profits.producer
    )
    grid = _theta_grid(pm, lo, hi, opts.theta_grid)
    coarse, _, _ = _producer_values(pm, grid, opts, refine=False)
    fine = lambda t: _producer_values(pm, t, opts, refine=True)  # noqa: E731
    refined = _grid_then_refine(fine, grid, coarse, opts.local_brackets, opts.theta_rtol)
    x, val, prem, ins = _with_kinks(fine, pm, refined, lo, hi)
    i = _select(x, val, prem)
    res, interior = _residual(pm, x[i : i + 1], prem[i : i + 1], x[i] * pm.r, x[i], opts.quad_atol)
    diag = {
        "theta_min": lo, "theta_max": hi, "theta_grid": opts.theta_grid,
        "premium_grid": opts.premium_grid, "brackets_refined": int(x.size),
        "tail_certified": certified, "domain_doublings": doublings,
        "stationarity_residual": float(res[0]), "premium_interior": bool(interior[0]),
        "non_certified": _infinite_psi_mean(pm),
        "baseline_theta": base.theta, "baseline_profit": base.profits.producer,
    }
    _heavy_tail_warning(pm, diag)
    cands = [Candidate(float(x[j]), float(prem[j]), float(val[j]), float(ins[j])) for j in range(x.size)]
    return _result(pm, Kind.SPNE, x[i], prem[i], cands, diag, opts.quad_atol)


# -- dictatorial ------------------------------------------------------------------------------

def _participation_cap(pm, theta, floor, opts, diag):
    """Largest premium keeping the producer at or above ``floor``.

    Producer profit is nonincreasing in the premium because the no-access mass
    is nondecreasing; this is checked on a grid and a violation switches the
    affected prices to a pointwise grid rule.  Returns ``(cap, feasible)``.
    """
    m = theta.size
    lo = theta * pm.r
    G = opts.premium_grid
    grid = lo[:, None] + (theta - lo)[:, None] * np.linspace(0.0, 1.0, G)[None, :]
    pp, _, _ = _profit_grid(pm, np.broadcast_to(theta[:, None], grid.shape), grid, opts.quad_atol)
    ok = pp >= floor
    feasible = ok[:, 0]
    monotone = np.all(np.diff(pp, axis=1) <= 1e-10 * np.maximum(pp[:, :-1], 1e-300), axis=1)
    cap = np.where(ok.all(axis=1), theta, lo)
    # last feasible grid point before the first infeasible one
    first_bad = np.argmax(~ok, axis=1)
    j = np.maximum(first_bad - 1, 0)
    rows = np.arange(m)
    a = grid[rows, j]
    b = grid[rows, np.minimum(first_bad, G - 1)]
    need = feasible & ~ok.all(axis=1) & monotone
    if need.any():
        th = theta[need]
        lo_b, hi_b = a[need], b[need]
        for _ in range(60):
            mid = 0.5 * (lo_b + hi_b)
            good = _profit_grid(pm, th, mid, opts.quad_atol)[0] >= floor
            lo_b = np.where(good, mid, lo_b)
            hi_b = np.where(good, hi_b, mid)
        cap[need] = lo_b
    fallback = feasible & ~monotone
    if fallback.any():
        diag["monotonicity_fallbacks"] = diag.get("monotonicity_fallbacks", 0) + int(fallback.sum())
        cap[fallback] = np.where(ok[fallback], grid[fallback], -np.inf).max(axis=1)
    return cap, feasible, fallback


def _dictatorial_values(pm, theta, floor, opts, refine, diag):
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    cap, feasible, _ = _participation_cap(pm, theta, floor, opts, diag)
    value = np.full(theta.shape, -np.inf)
    premium = np.full(theta.shape, NO_ENTRY)
    producer = np.full(theta.shape, np.nan)
    if feasible.any():
        th = theta[feasible]
        upper = np.minimum(cap[feasible], th)
        q, pi = _best_premium(pm, th, opts, upper=upper, refine=refine)
        # a capped search may leave nothing profitable; the insurer then stays out
        value[feasible] = np.where(np.isfinite(q), pi, -np.inf)
        premium[feasible] = q
        producer[feasible] = _profit_grid(pm, th, q, opts.quad_atol)[0]
    return value, premium, producer


def dictatorial(pm, opts: SolverOptions | None = None, base: EquilibriumResult | None = None) -> EquilibriumResult:
    """Insurer-optimal equilibrium subject to the producer's participation constraint."""
    opts = opts or SolverOptions()
    _require_density(pm)
    _require_profit_potential(pm)
    base = base or baseline(pm, opts)
    floor = base.profits.producer - opts.participation_tol
    psi_m = pm.psi_marginal
    lo, hi, certified, doublings = _theta_domain(
        pm, opts, lambda t: t * pm.r * psi_m.sf(t * pm.r), base.profits.producer
    )
    diag = {
        "theta_min": lo, "theta_max": hi, "theta_grid": opts.theta_grid,
        "premium_grid": opts.premium_grid, "tail_certified": certified,
        "domain_doublings": doublings, "participation_floor": floor,
        "baseline_theta": base.theta, "baseline_profit": base.profits.producer,
        "non_certified": _infinite_psi_mean(pm),
    }
    grid = _theta_grid(pm, lo, hi, opts.theta_grid)
    coarse, _, _ = _dictatorial_values(pm, grid, floor, opts, False, diag)
    if not np.isfinite(coarse).any():
        diag["insurer_never_enters"] = True
        return EquilibriumResult(
            Kind.BASELINE, base.theta, NO_ENTRY, base.masses, base.profits, base.candidates,
            {**base.diagnostics, **diag},
        )

    def objective(t):
        v, q, p = _dictatorial_values(pm, t, floor, opts, True, diag)
        return v, q, p

    refined = _grid_then_refine(objective, grid, coarse, opts.local_brackets, opts.theta_rtol)
    x, val, prem, prod = _with_kinks(objective, pm, refined, lo, hi)
    i = _select(x, np.where(np.isfinite(val), val, -np.inf), prem)
    if not np.isfinite(val[i]):
        diag["insurer_never_enters"] = True
        return EquilibriumResult(
            Kind.BASELINE, base.theta, NO_ENTRY, base.masses, base.profits, base.candidates,
            {**base.diagnostics, **diag},
        )
    _heavy_tail_warning(pm, diag)
    cands = [Candidate(float(x[j]), float(prem[j]), float(prod[j]), float(val[j])) for j in range(x.size)]
    diag["participation_slack"] = float(prod[i] - base.profits.producer)
    return _result(pm, Kind.DICTATORIAL, x[i], prem[i], cands, diag, opts.quad_atol)


# -- reports --------------------------------------------------------------------------------------

def compare(pm, opts: SolverOptions | None = None) -> ComparisonReport:
    opts = opts or SolverOptions()
    base = baseline(pm, opts)
    eq = spne(pm, opts, base=base)
    return ComparisonReport(
        baseline=base,
        with_insurer=eq,
        price_effect=eq.theta - base.theta,
        access_effect=(eq.masses.a + eq.masses.t) - base.masses.t,
        producer_gain=eq.profits.producer - base.profits.producer,
        insurer_profit=eq.profits.insurer,
    )


def kprime_scan(pm, theta_grid, opts: SolverOptions | None = None, base: EquilibriumResult | None = None):
    """Best responses along ``theta_grid`` that keep the producer above the no-insurance optimum."""
    opts = opts or SolverOptions()
    _require_density(pm)
    base = base or baseline(pm, opts)
    theta = np.asarray(theta_grid, dtype=float)
    if np.any(theta <= 0):
        raise DomainError("theta grid must be positive")
    premium, insurer = _best_premium(pm, theta, opts, refine=True)
    producer, _, _ = _profit_grid(pm, theta, premium, opts.quad_atol)
    keep = np.isfinite(premium) & (producer >= base.profits.producer - opts.participation_tol)
    return [Candidate(float(t), float(q), float(p), float(i)) for t, q, p, i in
            zip(theta[keep], premium[keep], producer[keep], insurer[keep])]
