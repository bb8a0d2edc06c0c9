"""Agent choices and the masses of the insure / treat / no-access regions.

Prices are handled in batches: every mass function takes arrays ``theta``
and ``premium`` of a common shape.  A premium of ``+inf`` encodes NoEntry.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .distributions import (
    AtomMixture,
    BoxMixture,
    DomainError,
    PlanarAtoms,
    ProductMeasure,
)
from .quadrature import integrate

NO_ENTRY = math.inf


class Choice(str, enum.Enum):
    A = "A"  # insure
    T = "T"  # treat out of pocket
    O = "O"  # no access


@dataclass(frozen=True)
class PricePair:
    theta: float
    premium: float = NO_ENTRY

    def __post_init__(self):
        if not (self.theta >= 0 and math.isfinite(self.theta)):
            raise DomainError(f"theta must be finite and nonnegative, got {self.theta}")
        if not self.premium >= 0:
            raise DomainError(f"premium must be nonnegative, got {self.premium}")

    @property
    def entered(self) -> bool:
        return math.isfinite(self.premium)


@dataclass(frozen=True)
class RegionMasses:
    a: float
    t: float
    o: float
    on_boundary: float = 0.0  # atom mass lying exactly on a decision boundary

    def as_tuple(self):
        return (self.a, self.t, self.o)


def classify(p, psi, prices: PricePair) -> Choice:
    theta, prem = prices.theta, prices.premium
    if p * theta > prem and p * psi > prem:
        return Choice.A
    if psi > theta and p * theta <= prem:
        return Choice.T
    return Choice.O


def classify_codes(p, psi, theta, premium):
    """Vectorised classify: 0 = A, 1 = T, 2 = O."""
    p, psi, theta, premium = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (p, psi, theta, premium)))
    with np.errstate(invalid="ignore"):
        insure = (p * theta > premium) & (p * psi > premium)
        treat = ~insure & (psi > theta) & (p * theta <= premium)
    return np.where(insure, 0, np.where(treat, 1, 2))


def _on_boundary(p, psi, theta, premium):
    with np.errstate(invalid="ignore"):
        return (p * theta == premium) | (p * psi == premium) | (psi == theta)


# -- product measures ---------------------------------------------------------

def _p_side_insured(pm, theta, prem, atol):
    """A = int_{c}^{1} S_psi(prem / p) f_p(p) dp with c = prem / theta."""
    mu_p, mu_psi = pm.mu_p, pm.mu_psi
    c = prem / theta
    kinks = [b for b in mu_psi.breakpoints if b > 0]
    bp = [prem / b for b in kinks] + [np.full_like(prem, b) for b in mu_p.breakpoints]
    bp = np.stack(bp, axis=1) if bp else None

    def integrand(x, q):
        return mu_psi.sf(q / x) * mu_p.pdf(x)

    val, _ = integrate(integrand, c, np.ones_like(c), args=(prem,), breakpoints=bp, atol=atol)
    return val


def _psi_side_insured(pm, theta, prem, atol):
    """Same mass integrated over psi: S_p(c) S_psi(theta) + int_{prem}^{theta} S_p(prem/psi) f_psi."""
    mu_p, mu_psi = pm.mu_p, pm.mu_psi
    c = prem / theta
    bp = [np.full_like(prem, b) for b in mu_psi.breakpoints]
    bp += [prem / b for b in mu_p.breakpoints if b > 0]
    bp = np.stack(bp, axis=1)

    def integrand(y, q):
        return mu_p.sf(q / y) * mu_psi.pdf(y)

    val, _ = integrate(integrand, prem, theta, args=(prem,), breakpoints=bp, atol=atol)
    return mu_p.sf(c) * mu_psi.sf(theta) + val


def _product_insured(pm: ProductMeasure, theta, prem, atol):
    mu_p, mu_psi = pm.mu_p, pm.mu_psi
    out = np.zeros_like(theta)
    live = (prem < theta) & (theta > 0)
    zero = live & (prem == 0)
    out[zero] = mu_p.sf(0.0) * mu_psi.sf(0.0)
    live &= prem > 0
    if not live.any():
        return out
    th, q = theta[live], prem[live]
    c = q / th
    if isinstance(mu_p, AtomMixture):
        loc, w = mu_p.locations, mu_p.weights
        keep = loc[None, :] > c[:, None]
        with np.errstate(divide="ignore"):
            tail = mu_psi.sf(q[:, None] / np.where(loc > 0, loc, np.inf)[None, :])
        out[live] = (w * keep * tail).sum(axis=1)
    elif isinstance(mu_psi, AtomMixture):
        loc, w = mu_psi.locations, mu_psi.weights
        with np.errstate(divide="ignore"):
            need = np.maximum(c[:, None], q[:, None] / np.where(loc > 0, loc, np.nan)[None, :])
        tail = np.where(np.isnan(need), 0.0, mu_p.sf(np.nan_to_num(need, nan=1.0)))
        out[live] = (w * tail).sum(axis=1)
    else:
        # the p-side integrand needs a bounded p-density on [c, 1]
        if mu_p.density_bounded(float(c.min()), 1.0):
            out[live] = _p_side_insured(pm, th, q, atol)
        else:
            out[live] = _psi_side_insured(pm, th, q, atol)
    return out


def _product_masses(pm, theta, prem, atol):
    a = _product_insured(pm, theta, prem, atol)
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(theta > 0, prem / theta, np.inf)
    f_p = np.where(np.isinf(c), 1.0, pm.mu_p.cdf(np.where(np.isinf(c), 1.0, c)))
    t = pm.mu_psi.sf(theta) * f_p
    return a, t, np.zeros_like(a)


# -- smoothed atoms -------------------------------------------------------------

def _box_masses(pm: BoxMixture, theta, prem):
    p0, p1, s0, s1, w = (v[None, :] for v in pm.arrays())
    th = theta[:, None]
    q = prem[:, None]
    dp, ds = p1 - p0, s1 - s0
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(th > 0, q / th, np.inf)
        p_treat = np.where(np.isinf(c), 1.0, np.clip((c - p0) / dp, 0.0, 1.0))
        t = np.clip((s1 - th) / ds, 0.0, 1.0) * p_treat

        # insured: (1/dp) int_{max(p0, c)}^{p1} clip((s1 - q/p)/ds, 0, 1) dp
        lo = np.maximum(p0, c)
        hi = np.broadcast_to(p1, lo.shape)
        p_a = np.where(q > 0, q / s1, 0.0)  # below: nobody with this p insures
        p_b = np.where(s0 > 0, q / s0, np.inf)  # above: everyone with this p insures
        m_lo = np.clip(np.maximum(lo, p_a), lo, hi)
        m_hi = np.clip(np.minimum(hi, p_b), m_lo, hi)
        safe_lo = np.where(m_hi > m_lo, m_lo, 1.0)
        safe_hi = np.where(m_hi > m_lo, m_hi, 1.0)
        middle = np.where(
            m_hi > m_lo,
            (s1 * (safe_hi - safe_lo) - q * np.log(safe_hi / safe_lo)) / ds,
            0.0,
        )
        full_lo = np.clip(np.maximum(lo, p_b), lo, hi)
        full = np.where(np.isfinite(full_lo), hi - full_lo, 0.0)
        a = np.where((lo < hi) & np.isfinite(q), (np.maximum(middle, 0.0) + np.maximum(full, 0.0)) / dp, 0.0)
    a = np.clip(a, 0.0, 1.0)
    return (w * a).sum(axis=1), (w * t).sum(axis=1), np.zeros(theta.shape)


def _atom_masses(pm: PlanarAtoms, theta, prem):
    p, psi, w = pm.p[None, :], pm.psi[None, :], pm.weights[None, :]
    codes = classify_codes(p, psi, theta[:, None], prem[:, None])
    a = (w * (codes == 0)).sum(axis=1)
    t = (w * (codes == 1)).sum(axis=1)
    edge = (w * _on_boundary(p, psi, theta[:, None], prem[:, None])).sum(axis=1)
    return a, t, edge


_CELLS = 1_000_000  # price-by-component cells per chunk


def _chunked(fn, pm, theta, premium):
    k = len(pm.points) if isinstance(pm, PlanarAtoms) else len(pm.boxes)
    step = max(1, _CELLS // k)
    if theta.size == 0:
        return np.zeros(0), np.zeros(0), np.zeros(0)
    parts = [fn(pm, theta[i:i + step], premium[i:i + step]) for i in range(0, theta.size, step)]
    return tuple(np.concatenate([part[j] for part in parts]) for j in range(3))


def masses_batch(pm, theta, premium, atol=1e-10):
    """Region masses for arrays of prices.

    Returns ``(a, t, o, on_boundary)`` arrays of the broadcast shape.
    """
    theta, premium = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(premium, dtype=float))
    shape = theta.shape
    theta, premium = theta.ravel().copy(), premium.ravel().copy()
    if np.any(theta < 0) or np.any(premium < 0) or np.any(~np.isfinite(theta)):
        raise DomainError("prices must be nonnegative with finite theta")
    if isinstance(pm, (PlanarAtoms, BoxMixture)):
        a, t, edge = _chunked(_atom_masses if isinstance(pm, PlanarAtoms) else _box_masses, pm, theta, premium)
    elif isinstance(pm, ProductMeasure):
        a, t, edge = _product_masses(pm, theta, premium, atol)
    else:
        raise DomainError(f"unsupported population type {type(pm).__name__}")
    a = np.clip(a, 0.0, 1.0)
    t = np.clip(t, 0.0, 1.0 - a)
    o = 1.0 - a - t
    return tuple(v.reshape(shape) for v in (a, t, o, edge))


def region_masses(pm, prices: PricePair, atol=1e-10) -> RegionMasses:
    a, t, o, edge = masses_batch(pm, prices.theta, prices.premium, atol=atol)
    return RegionMasses(float(a), float(t), float(o), float(edge))


def insured_slope_batch(pm: ProductMeasure, theta, premium, atol=1e-10):
    """d(insured mass)/d(premium) for product densities, 0 < premium < theta.

    -(1/theta) S_psi(theta) f_p(c) - int_c^1 f_psi(premium/p) f_p(p) / p dp.
    """
    mu_p, mu_psi = pm.mu_p, pm.mu_psi
    theta = np.asarray(theta, dtype=float)
    prem = np.asarray(premium, dtype=float)
    c = prem / theta
    kinks = [b for b in mu_psi.breakpoints if b > 0]
    bp = [prem / b for b in kinks] + [np.full_like(prem, b) for b in mu_p.breakpoints]

    def integrand(x, q):
        return mu_psi.pdf(q / x) * mu_p.pdf(x) / x

    val, _ = integrate(integrand, c, np.ones_like(c), args=(prem,), breakpoints=np.stack(bp, axis=1), atol=atol)
    return -mu_psi.sf(theta) * mu_p.pdf(c) / theta - val


def mc_region_masses(pm, prices: PricePair, n: int, seed):
    """Monte Carlo estimate of the region masses with binomial standard errors."""
    if n < 1000:
        raise DomainError("Monte Carlo oracle needs n >= 1000")
    rng = np.random.default_rng(seed)
    p, psi = pm.sample(rng, n)
    codes = classify_codes(p, psi, prices.theta, prices.premium)
    frac = np.bincount(codes, minlength=3) / n
    se = np.sqrt(frac * (1 - frac) / n)
    return RegionMasses(*map(float, frac)), tuple(map(float, se))


def mc_masses_batch(pm, theta, premium, n: int, seed):
    """One shared sample classified at every price pair; returns an (m, 3) array of fractions."""
    if n < 1000:
        raise DomainError("Monte Carlo oracle needs n >= 1000")
    rng = np.random.default_rng(seed)
    p, psi = pm.sample(rng, n)
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    premium = np.atleast_1d(np.asarray(premium, dtype=float))
    out = np.empty((theta.size, 3))
    for i, (th, q) in enumerate(zip(theta, premium)):
        out[i] = np.bincount(classify_codes(p, psi, th, q), minlength=3) / n
    return out
