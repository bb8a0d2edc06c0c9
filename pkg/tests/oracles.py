"""Reference computations that share no code with the package.

Densities and tails come from scipy.stats, integrals from scipy.integrate,
and decisions from the raw inequalities written out again here.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import integrate, stats


def scipy_marginal(kind, *params):
    if kind == "beta":
        return stats.beta(*params)
    if kind == "exp":
        return stats.expon(scale=1.0 / params[0])
    if kind == "pareto":
        scale, shape = params
        return stats.pareto(shape, scale=scale)
    raise ValueError(kind)


def product_masses(fp, fpsi, theta, premium):
    """Region masses of a product measure by direct integration of the densities.

    Insured: p > premium/theta and psi > premium/p.  Treated: psi > theta and
    p <= premium/theta.  Everything else has no access.
    """
    cut = min(premium / theta, 1.0)
    treated = fpsi.sf(theta) * fp.cdf(cut)
    if premium >= theta:
        insured = 0.0
    elif premium == 0:
        insured = fpsi.sf(0.0)
    else:
        # psi-support starting above 0 puts a kink at p = premium / start
        start = fpsi.support()[0]
        kink = premium / start if start > 0 else None
        points = [kink] if kink is not None and cut < kink < 1 else None
        insured, _ = integrate.quad(lambda p: fp.pdf(p) * fpsi.sf(premium / p), cut, 1.0,
                                    epsabs=1e-13, epsrel=1e-12, limit=200, points=points)
    return insured, treated, 1.0 - insured - treated


def raw_choice(p, psi, theta, premium):
    """0 = insure, 1 = treat, 2 = no access, straight from the preference order."""
    if p * theta > premium and p * psi > premium:
        return 0
    if psi > theta and p * theta <= premium:
        return 1
    return 2


def box_insured(p0, p1, s0, s1, theta, premium):
    """Insured share of a uniform box, integrating over psi (vectorised over prices).

    For psi fixed, insured p lie in (max(p0, premium/theta, premium/psi), p1).
    """
    premium = np.asarray(premium, dtype=float)
    theta = np.asarray(theta, dtype=float)
    m = np.maximum(p0, premium / theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        knee = np.where(m > 0, premium / m, 0.0)  # premium/psi >= m  iff  psi <= knee
        lower = np.maximum(s0, np.where(premium > 0, premium / p1, 0.0))
        upper = np.minimum(s1, knee)
        curved = np.where(
            (upper > lower) & (premium > 0),
            p1 * (upper - lower) - premium * (np.log(np.maximum(upper, 1e-300)) - np.log(np.maximum(lower, 1e-300))),
            0.0,
        )
    flat = np.clip(p1 - m, 0, None) * np.clip(s1 - np.maximum(s0, knee), 0, None)
    return (curved + flat) / ((p1 - p0) * (s1 - s0))


def box_treated(p0, p1, s0, s1, theta, premium):
    theta = np.asarray(theta, dtype=float)
    cut = np.asarray(premium, dtype=float) / theta
    p_share = np.clip((np.minimum(cut, p1) - p0) / (p1 - p0), 0, 1)
    s_share = np.clip((s1 - np.maximum(theta, s0)) / (s1 - s0), 0, 1)
    return p_share * s_share


def boxes_from_atoms(atoms, radius):
    """Uniform squares of half-side radius, clipped to [0,1] x [0,inf)."""
    return [(max(p - radius, 0.0), min(p + radius, 1.0), max(s - radius, 0.0), s + radius, w) for p, s, w in atoms]


def brute_force_compare(atoms, radius, r, n_theta=2000, n_premium=2000):
    """Subgame-perfect and no-insurance optima by exhaustive price grids.

    For each of ``n_theta`` prices the insurer picks the best of ``n_premium``
    premiums spanning [theta r, min(theta, max p psi)] (higher premiums sell
    nothing); the producer picks the best price.
    """
    boxes = boxes_from_atoms(atoms, radius)
    top = max(b[3] for b in boxes)
    reach = max(b[1] * b[3] for b in boxes)  # premiums above max p psi insure nobody
    thetas = np.linspace(top / r / n_theta, top / r * 1.02, n_theta)
    frac = np.linspace(0.0, 1.0, n_premium)

    def masses(theta, premium):
        a = sum(w * box_insured(p0, p1, s0, s1, theta, premium) for p0, p1, s0, s1, w in boxes)
        t = sum(w * box_treated(p0, p1, s0, s1, theta, premium) for p0, p1, s0, s1, w in boxes)
        return a, t

    best = (-math.inf, None)
    for chunk in np.array_split(np.arange(n_theta), 20):
        th = thetas[chunk][:, None]
        hi = np.maximum(np.minimum(th, reach), th * r)
        prem = th * r + (hi - th * r) * frac[None, :]
        a, t = masses(th, prem)
        insurer = (prem - th * r) * a
        j = np.argmax(insurer, axis=1)
        rows = np.arange(chunk.size)
        pa, pt = a[rows, j], t[rows, j]
        producer = thetas[chunk] * r * (pa + pt)
        k = int(np.argmax(producer))
        if producer[k] > best[0]:
            best = (producer[k], (thetas[chunk][k], prem[k, j[k]], pa[k], pt[k]))
    theta_s, prem_s, a_s, t_s = best[1]
    fine = np.linspace(top / r / (50 * n_theta), top * 1.02, 50 * n_theta)
    sf = sum(w * np.clip((s1 - np.maximum(fine, s0)) / (s1 - s0), 0, 1) for _, _, s0, s1, w in boxes)
    i = int(np.argmax(fine * r * sf))
    return {
        "spne": (theta_s, prem_s, a_s, t_s, best[0]),
        "baseline": (fine[i], sf[i], fine[i] * r * sf[i]),
    }


def reservation_price_loops(consumption, quality, survival, alpha, eps1, eps2, t, last):
    """Plain double loop over k = 1..last - t of the weighted, discounted series."""
    total = 0.0
    for k in range(1, last - t + 1):
        w = 1.0
        for l in range(t, t + k + 1):
            w *= quality[l] * survival[l]
        w /= (1 + alpha) ** k
        total += w * consumption[t + k] * eps1 * (1 + eps2) ** (-k)
    return total
