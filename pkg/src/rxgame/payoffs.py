"""Producer and insurer profits."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .population import PricePair, RegionMasses, masses_batch, region_masses


@dataclass(frozen=True)
class ProfitPair:
    producer: float
    insurer: float


def profits_from_masses(theta, premium, a, t, r, cost_producer=0.0, cost_insurer=0.0):
    """Vectorised profits given region masses; NoEntry premiums give insurer profit 0.

    The optional marginal costs default to zero; a unit of treatment costs the
    producer ``cost_producer`` and each insured agent costs the insurer
    ``cost_insurer`` on top of the expected reimbursement.
    """
    theta = np.asarray(theta, dtype=float)
    premium = np.asarray(premium, dtype=float)
    producer = (theta - cost_producer) * r * (a + t)
    entered = np.isfinite(premium)
    margin = np.where(entered, premium, 0.0) - theta * r - cost_insurer
    insurer = np.where(entered, margin * a, 0.0)
    return producer, insurer


def profits(pm, prices: PricePair, masses: RegionMasses | None = None, cost_producer=0.0, cost_insurer=0.0) -> ProfitPair:
    m = masses if masses is not None else region_masses(pm, prices)
    producer, insurer = profits_from_masses(prices.theta, prices.premium, m.a, m.t, pm.r, cost_producer, cost_insurer)
    return ProfitPair(float(producer), float(insurer))


def profits_batch(pm, theta, premium, atol=1e-10):
    a, t, _, _ = masses_batch(pm, theta, premium, atol=atol)
    return profits_from_masses(theta, premium, a, t, pm.r)


def no_insurer_profit(pm, theta):
    """theta * r * P[psi > theta]; vectorised over theta."""
    theta_arr = np.asarray(theta, dtype=float)
    out = theta_arr * pm.r * pm.psi_marginal.sf(theta_arr)
    return float(out) if np.ndim(theta) == 0 else out


def in_delta(prices: PricePair, r: float) -> bool:
    if not math.isfinite(prices.premium):
        return False
    return prices.theta * r <= prices.premium <= prices.theta
