"""Multi-period agents reduced to a diagnosis probability and a reservation price.

Paths are deterministic: consumption, quality and survival factors are given
per period, so conditional expectations collapse to products of factors.
Periods run from 0 to ``horizon - 1``.  An infinite horizon is written
``horizon=None``; arrays are then extended by repeating their last entry.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .distributions import DomainError, PlanarAtoms, planar_atoms
from .population import Choice

TAIL_RTOL = 1e-10


@dataclass(frozen=True)
class LifecycleAgent:
    consumption: tuple
    quality: tuple
    survival: tuple
    discount: float
    efficacy: float  # eps1: quality impact of treatment
    improvement: float  # eps2: survival improvement rate
    diag_prob: tuple
    horizon: int | None = None

    def __post_init__(self):
        for name in ("consumption", "quality", "survival", "diag_prob"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
            if not getattr(self, name):
                raise DomainError(f"{name} must be nonempty")
        if self.horizon is not None:
            if self.horizon < 1:
                raise DomainError("horizon must be at least 1")
            short = [n for n in ("consumption", "quality", "survival", "diag_prob") if len(getattr(self, n)) < self.horizon]
            if short:
                raise DomainError(f"arrays shorter than the horizon: {', '.join(short)}")
        if any(not 0 < q <= 1 for q in self.quality):
            raise DomainError("quality factors must lie in (0, 1]")
        if any(not 0 < g <= 1 for g in self.survival):
            raise DomainError("survival factors must lie in (0, 1]")
        if any(not 0 <= p <= 1 for p in self.diag_prob):
            raise DomainError("diagnosis probabilities must lie in [0, 1]")
        if any(c < 0 for c in self.consumption):
            raise DomainError("consumption must be nonnegative")
        if self.discount < 0:
            raise DomainError("discount rate must be nonnegative")
        if self.efficacy < 0:
            raise DomainError("efficacy eps1 must be nonnegative")
        if self.improvement < 0:
            raise DomainError("improvement eps2 must be nonnegative")

    def _at(self, arr, t):
        if self.horizon is not None and t >= self.horizon:
            raise DomainError(f"period {t} beyond horizon {self.horizon}")
        return arr[t] if t < len(arr) else arr[-1]

    def _series(self, arr, start, stop):
        """Entries start..stop-1, extending by the last value if needed."""
        out = np.asarray(arr[start:stop], dtype=float)
        if out.size < stop - start:
            out = np.concatenate([out, np.full(stop - start - out.size, arr[-1])])
        return out


@dataclass(frozen=True)
class SinglePeriodAgent:
    wealth: float
    diag_prob: float
    success: float
    loss_fraction: float

    def __post_init__(self):
        if self.wealth < 0:
            raise DomainError("wealth must be nonnegative")
        for name in ("diag_prob", "success", "loss_fraction"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise DomainError(f"{name} must lie in [0, 1], got {v}")


def single_period_psi(a: SinglePeriodAgent) -> float:
    return a.wealth * a.success * (1.0 - a.loss_fraction)


def utility_weight(agent: LifecycleAgent, s: int, t: int) -> float:
    """prod_{l=s}^{t} q_l gamma_l / (1 + alpha)^(t - s)."""
    if not 0 <= s <= t:
        raise DomainError(f"need 0 <= s <= t, got s={s}, t={t}")
    if agent.horizon is not None and t >= agent.horizon:
        raise DomainError(f"period {t} beyond the last period {agent.horizon - 1}")
    q = agent._series(agent.quality, s, t + 1)
    g = agent._series(agent.survival, s, t + 1)
    return float(np.prod(q * g) / (1.0 + agent.discount) ** (t - s))


def _cutoff(agent: LifecycleAgent, t: int) -> int:
    """Number of terms after which the geometric tail bound is negligible."""
    eps1, eps2 = agent.efficacy, agent.improvement
    if agent.horizon is not None:
        last = agent.horizon - 1 - t
    else:
        last = math.inf
    if eps2 > 0:
        # eps1 (1+eps2)^-K max(c) / eps2 < TAIL_RTOL max(c)
        need = math.log(max(eps1 / (eps2 * TAIL_RTOL), 1.0)) / math.log1p(eps2)
        k = math.ceil(need) + 1
    elif math.isfinite(last):
        k = last
    else:
        raise DomainError("eps2 = 0 with an infinite horizon: the reservation price series has no usable bound")
    return int(min(k, last))


def reservation_price(agent: LifecycleAgent, t: int, terms: int | None = None) -> float:
    """sum_{k>=1} w(t, t+k) c_{t+k} eps1 (1+eps2)^-k, truncated by the tail bound.

    ``terms`` overrides the automatic cutoff (used to check truncation).
    """
    if t < 0 or (agent.horizon is not None and t >= agent.horizon):
        raise DomainError(f"period {t} outside [0, horizon)")
    if agent.efficacy == 0:
        return 0.0
    K = _cutoff(agent, t) if terms is None else int(terms)
    if agent.horizon is not None:
        K = min(K, agent.horizon - 1 - t)
    if K <= 0:
        return 0.0
    q = agent._series(agent.quality, t, t + K + 1)
    g = agent._series(agent.survival, t, t + K + 1)
    c = agent._series(agent.consumption, t + 1, t + K + 1)
    k = np.arange(1, K + 1)
    weights = np.cumprod(q * g)[1:] / (1.0 + agent.discount) ** k
    return float(np.sum(weights * c * agent.efficacy * (1.0 + agent.improvement) ** (-k.astype(float))))


def diag_prob(agent: LifecycleAgent, t: int) -> float:
    return float(agent._at(agent.diag_prob, t))


def decide(agent, t: int, theta: float, premium: float) -> Choice:
    """Weak-inequality rule: insure iff premium <= p_t min(psi, theta)."""
    if isinstance(agent, SinglePeriodAgent):
        psi, p = single_period_psi(agent), agent.diag_prob
    else:
        psi, p = reservation_price(agent, t), diag_prob(agent, t)
    if premium <= p * min(psi, theta):
        return Choice.A
    if psi >= theta:
        return Choice.T
    return Choice.O


def on_decision_boundary(agent, t: int, theta: float, premium: float) -> bool:
    """True when the weak and strict conventions could disagree for this agent."""
    if isinstance(agent, SinglePeriodAgent):
        psi, p = single_period_psi(agent), agent.diag_prob
    else:
        psi, p = reservation_price(agent, t), diag_prob(agent, t)
    return premium == p * min(psi, theta) or psi == theta


def agent_point(agent, t: int = 0):
    if isinstance(agent, SinglePeriodAgent):
        return agent.diag_prob, single_period_psi(agent)
    return diag_prob(agent, t), reservation_price(agent, t)


def reduce_cohort(agents: Sequence, t: int, r: float) -> PlanarAtoms:
    """Equal-weight atoms at (p_t, psi(t)); coincident agents merge into one atom."""
    if not agents:
        raise DomainError("cohort is empty")
    w = 1.0 / len(agents)
    return planar_atoms([(*agent_point(a, t), w) for a in agents], r)


# -- cohort files -------------------------------------------------------------------------------

LIFECYCLE_COLUMNS = ("consumption", "quality", "survival", "discount", "efficacy", "improvement", "diag_prob", "horizon")
SINGLE_COLUMNS = ("wealth", "diag_prob", "success", "loss_fraction")


def _floats(cell):
    return tuple(float(v) for v in cell.split(";") if v.strip())


def read_cohort(path) -> list:
    """Read a cohort CSV.  The header decides the agent type.

    Multi-period rows store arrays as semicolon-separated lists; an empty
    ``horizon`` cell means an infinite horizon.
    """
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = set(reader.fieldnames or ())
        agents = []
        for lineno, row in enumerate(reader, start=2):
            try:
                if set(SINGLE_COLUMNS) <= cols:
                    agents.append(SinglePeriodAgent(*(float(row[c]) for c in SINGLE_COLUMNS)))
                elif set(LIFECYCLE_COLUMNS) - {"horizon"} <= cols:
                    h = (row.get("horizon") or "").strip()
                    agents.append(LifecycleAgent(
                        _floats(row["consumption"]), _floats(row["quality"]), _floats(row["survival"]),
                        float(row["discount"]), float(row["efficacy"]), float(row["improvement"]),
                        _floats(row["diag_prob"]), int(h) if h else None,
                    ))
                else:
                    raise DomainError(f"unrecognised cohort header {sorted(cols)}")
            except (ValueError, KeyError) as exc:
                raise DomainError(f"{path}:{lineno}: {exc}") from exc
    return agents


def write_cohort(path, agents: Iterable) -> None:
    agents = list(agents)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if agents and isinstance(agents[0], SinglePeriodAgent):
            writer.writerow(SINGLE_COLUMNS)
            for a in agents:
                writer.writerow([repr(getattr(a, c)) for c in SINGLE_COLUMNS])
        else:
            writer.writerow(LIFECYCLE_COLUMNS)
            for a in agents:
                writer.writerow([
                    ";".join(map(repr, a.consumption)), ";".join(map(repr, a.quality)),
                    ";".join(map(repr, a.survival)), repr(a.discount), repr(a.efficacy),
                    repr(a.improvement), ";".join(map(repr, a.diag_prob)),
                    "" if a.horizon is None else a.horizon,
                ])


def random_agent(rng: np.random.Generator, horizon: int | None = 40) -> LifecycleAgent:
    """Agent with parameters drawn from broad ranges; used for cohorts and tests."""
    n = horizon if horizon is not None else 12
    return LifecycleAgent(
        consumption=tuple(rng.uniform(0.5, 2.0, n)),
        quality=tuple(rng.uniform(0.7, 1.0, n)),
        survival=tuple(rng.uniform(0.8, 1.0, n)),
        discount=float(rng.uniform(0.0, 0.2)),
        efficacy=float(rng.uniform(0.0, 2.0)),
        improvement=float(rng.uniform(0.05, 1.0)),
        diag_prob=tuple(rng.uniform(0.0, 1.0, n)),
        horizon=horizon,
    )
