"""Marginal laws on [0, 1] and R+, and population measures over (p, psi).

All objects are frozen dataclasses; evaluation methods accept scalars or
numpy arrays and never mutate state.  Sampling takes an explicit
``numpy.random.Generator`` so every draw is reproducible from a seed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence, Union

import numpy as np
from scipy import special


class DomainError(ValueError):
    """Invalid parameter or argument outside an operation's domain."""


def _arr(x):
    return np.asarray(x, dtype=float)


def _out(x, like):
    return float(x) if np.ndim(like) == 0 else x


@dataclass(frozen=True)
class Beta:
    """Beta(s1, s2) on [0, 1]."""

    s1: float
    s2: float

    def __post_init__(self):
        if not (self.s1 > 0 and self.s2 > 0):
            raise DomainError(f"Beta shapes must be positive, got ({self.s1}, {self.s2})")

    support = (0.0, 1.0)
    has_density = True

    @property
    def breakpoints(self):
        return (0.0, 1.0)

    def pdf(self, x):
        x = _arr(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            logf = (
                special.xlogy(self.s1 - 1, x)
                + special.xlog1py(self.s2 - 1, -x)
                - special.betaln(self.s1, self.s2)
            )
            out = np.where((x > 0) & (x < 1), np.exp(logf), 0.0)
        # closed endpoints carry the limiting value when it is finite
        if self.s1 == 1:
            out = np.where(x == 0, self.s2, out)
        if self.s2 == 1:
            out = np.where(x == 1, self.s1, out)
        return _out(out, x)

    def cdf(self, x):
        x = _arr(x)
        return _out(special.betainc(self.s1, self.s2, np.clip(x, 0.0, 1.0)), x)

    def sf(self, x):
        # betaincc is several times slower than betainc; use 1 - I_x(s1, s2) below
        # one half and I_{1-x}(s2, s1) above, where 1 - x is exact
        x = _arr(x)
        xc = np.clip(x, 0.0, 1.0)
        low = xc < 0.5
        out = np.where(
            low,
            1.0 - special.betainc(self.s1, self.s2, np.where(low, xc, 0.0)),
            special.betainc(self.s2, self.s1, np.where(low, 0.5, 1.0 - xc)),
        )
        return _out(out, x)

    def quantile(self, q):
        q = _arr(q)
        if np.any((q < 0) | (q > 1)):
            raise DomainError("quantile level must lie in [0, 1]")
        return _out(special.betaincinv(self.s1, self.s2, q), q)

    def density_bounded(self, lo, hi):
        return not ((self.s1 < 1 and lo <= 0) or (self.s2 < 1 and hi >= 1))

    def mean(self):
        return self.s1 / (self.s1 + self.s2)

    def sample(self, rng, n):
        return self.quantile(rng.random(n))


@dataclass(frozen=True)
class Exponential:
    """Exponential law with rate ``rate`` (mean ``1 / rate``)."""

    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise DomainError(f"Exponential rate must be positive, got {self.rate}")

    support = (0.0, math.inf)
    has_density = True

    @property
    def breakpoints(self):
        return (0.0,)

    def pdf(self, x):
        x = _arr(x)
        with np.errstate(over="ignore"):
            out = np.where(x >= 0, self.rate * np.exp(-self.rate * np.maximum(x, 0.0)), 0.0)
        return _out(out, x)

    def cdf(self, x):
        x = _arr(x)
        return _out(np.where(x > 0, -np.expm1(-self.rate * np.maximum(x, 0.0)), 0.0), x)

    def sf(self, x):
        x = _arr(x)
        return _out(np.where(x > 0, np.exp(-self.rate * np.maximum(x, 0.0)), 1.0), x)

    def quantile(self, q):
        q = _arr(q)
        if np.any((q < 0) | (q >= 1)):
            raise DomainError("quantile level must lie in [0, 1) for unbounded support")
        return _out(-np.log1p(-q) / self.rate, q)

    def density_bounded(self, lo, hi):
        return True

    def mean(self):
        return 1.0 / self.rate

    def sample(self, rng, n):
        return self.quantile(rng.random(n))


@dataclass(frozen=True)
class Pareto:
    """Pareto law on [scale, inf): density shape * scale**shape / t**(shape + 1)."""

    scale: float
    shape: float

    def __post_init__(self):
        if not (self.scale > 0 and self.shape > 0):
            raise DomainError(f"Pareto scale and shape must be positive, got ({self.scale}, {self.shape})")

    has_density = True

    @property
    def support(self):
        return (self.scale, math.inf)

    @property
    def breakpoints(self):
        return (self.scale,)

    def pdf(self, x):
        x = _arr(x)
        xs = np.maximum(x, self.scale)
        out = np.where(x >= self.scale, self.shape * self.scale**self.shape / xs ** (self.shape + 1), 0.0)
        return _out(out, x)

    def cdf(self, x):
        x = _arr(x)
        xs = np.maximum(x, self.scale)
        return _out(np.where(x > self.scale, -np.expm1(-self.shape * np.log(xs / self.scale)), 0.0), x)

    def sf(self, x):
        x = _arr(x)
        xs = np.maximum(x, self.scale)
        return _out(np.where(x > self.scale, (self.scale / xs) ** self.shape, 1.0), x)

    def quantile(self, q):
        q = _arr(q)
        if np.any((q < 0) | (q >= 1)):
            raise DomainError("quantile level must lie in [0, 1) for unbounded support")
        return _out(self.scale * np.exp(-np.log1p(-q) / self.shape), q)

    def density_bounded(self, lo, hi):
        return True

    def mean(self):
        return math.inf if self.shape <= 1 else self.shape * self.scale / (self.shape - 1)

    def sample(self, rng, n):
        return self.quantile(rng.random(n))


@dataclass(frozen=True)
class UniformInterval:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise DomainError(f"uniform bounds must satisfy lo < hi, got ({self.lo}, {self.hi})")

    has_density = True

    @property
    def support(self):
        return (self.lo, self.hi)

    @property
    def breakpoints(self):
        return (self.lo, self.hi)

    def pdf(self, x):
        x = _arr(x)
        return _out(np.where((x >= self.lo) & (x <= self.hi), 1.0 / (self.hi - self.lo), 0.0), x)

    def cdf(self, x):
        x = _arr(x)
        return _out(np.clip((x - self.lo) / (self.hi - self.lo), 0.0, 1.0), x)

    def sf(self, x):
        x = _arr(x)
        return _out(np.clip((self.hi - x) / (self.hi - self.lo), 0.0, 1.0), x)

    def quantile(self, q):
        q = _arr(q)
        if np.any((q < 0) | (q > 1)):
            raise DomainError("quantile level must lie in [0, 1]")
        return _out(self.lo + q * (self.hi - self.lo), q)

    def density_bounded(self, lo, hi):
        return True

    def mean(self):
        return 0.5 * (self.lo + self.hi)

    def sample(self, rng, n):
        return self.quantile(rng.random(n))


@dataclass(frozen=True)
class AtomMixture:
    """Finitely many weighted point masses.

    The survival function is the strict tail ``P[X > x]`` so that atoms sitting
    exactly on a decision boundary are classified by the same strict/weak
    inequalities as individual agents.
    """

    atoms: tuple

    def __post_init__(self):
        atoms = tuple((float(x), float(w)) for x, w in self.atoms)
        if not atoms:
            raise DomainError("AtomMixture needs at least one atom")
        w = np.array([a[1] for a in atoms])
        if np.any(w < 0):
            raise DomainError("atom weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise DomainError(f"atom weights must sum to 1, got {w.sum()!r}")
        object.__setattr__(self, "atoms", tuple(sorted(atoms)))

    has_density = False

    @property
    def locations(self):
        return np.array([a[0] for a in self.atoms])

    @property
    def weights(self):
        return np.array([a[1] for a in self.atoms])

    @property
    def support(self):
        return (self.atoms[0][0], self.atoms[-1][0])

    @property
    def breakpoints(self):
        return tuple(a[0] for a in self.atoms)

    def cdf(self, x):
        x = _arr(x)
        out = (self.weights * (self.locations <= x[..., None])).sum(axis=-1)
        return _out(np.minimum(out, 1.0), x)

    def sf(self, x):
        x = _arr(x)
        out = (self.weights * (self.locations > x[..., None])).sum(axis=-1)
        return _out(out, x)

    def quantile(self, q):
        q = _arr(q)
        if np.any((q < 0) | (q > 1)):
            raise DomainError("quantile level must lie in [0, 1]")
        cum = np.cumsum(self.weights)
        idx = np.searchsorted(cum, q - 1e-15, side="left")
        return _out(self.locations[np.minimum(idx, len(cum) - 1)], q)

    def density_bounded(self, lo, hi):
        return False

    def mean(self):
        return float(self.locations @ self.weights)

    def sample(self, rng, n):
        return self.locations[rng.choice(len(self.atoms), size=n, p=self.weights)]


@dataclass(frozen=True)
class UniformMixture:
    """Weighted mixture of uniform intervals; the psi-marginal of a smoothed population."""

    components: tuple  # ((lo, hi, weight), ...)

    has_density = True

    @property
    def _lo(self):
        return np.array([c[0] for c in self.components])

    @property
    def _hi(self):
        return np.array([c[1] for c in self.components])

    @property
    def _w(self):
        return np.array([c[2] for c in self.components])

    @property
    def support(self):
        return (float(self._lo.min()), float(self._hi.max()))

    @property
    def breakpoints(self):
        return tuple(sorted(set(self._lo) | set(self._hi)))

    def pdf(self, x):
        x = _arr(x)[..., None]
        out = (self._w * ((x >= self._lo) & (x <= self._hi)) / (self._hi - self._lo)).sum(axis=-1)
        return _out(out, x[..., 0])

    def cdf(self, x):
        x = _arr(x)[..., None]
        out = (self._w * np.clip((x - self._lo) / (self._hi - self._lo), 0, 1)).sum(axis=-1)
        return _out(out, x[..., 0])

    def sf(self, x):
        x = _arr(x)[..., None]
        out = (self._w * np.clip((self._hi - x) / (self._hi - self._lo), 0, 1)).sum(axis=-1)
        return _out(out, x[..., 0])

    def quantile(self, q):
        q = _arr(q)
        if np.any((q < 0) | (q > 1)):
            raise DomainError("quantile level must lie in [0, 1]")
        lo, hi = self.support
        flat = np.atleast_1d(q).astype(float)
        a = np.full(flat.shape, lo)
        b = np.full(flat.shape, hi)
        for _ in range(100):
            mid = 0.5 * (a + b)
            below = self.cdf(mid) < flat
            a = np.where(below, mid, a)
            b = np.where(below, b, mid)
        return _out(b.reshape(np.shape(q)), q)

    def density_bounded(self, lo, hi):
        return True

    def mean(self):
        return float((self._w * 0.5 * (self._lo + self._hi)).sum())

    def sample(self, rng, n):
        k = rng.choice(len(self.components), size=n, p=self._w / self._w.sum())
        return self._lo[k] + rng.random(n) * (self._hi[k] - self._lo[k])


Marginal = Union[Beta, Exponential, Pareto, UniformInterval, AtomMixture, UniformMixture]


def survival(m, x):
    """``P[X > x]`` under marginal ``m``."""
    return m.sf(x)


def cdf(m, x):
    return m.cdf(x)


def quantile(m, q):
    return m.quantile(q)


def sample(m, rng, n):
    if n < 1:
        raise DomainError("sample size must be at least 1")
    return np.asarray(m.sample(rng, n), dtype=float)


def is_heavy_tailed(m) -> bool:
    return isinstance(m, Pareto)


def _check_r(r):
    if not 0 < r < 1:
        raise DomainError(f"incidence r must lie in the open interval (0, 1), got {r}")


@dataclass(frozen=True)
class ProductMeasure:
    """Independent (p, psi) with marginals ``mu_p`` on [0, 1] and ``mu_psi`` on R+."""

    mu_p: Marginal
    mu_psi: Marginal
    r: float

    def __post_init__(self):
        _check_r(self.r)
        lo, hi = self.mu_p.support
        if lo < 0 or hi > 1:
            raise DomainError("mu_p must be supported in [0, 1]")
        if self.mu_psi.support[0] < 0:
            raise DomainError("mu_psi must be supported in [0, inf)")

    @property
    def psi_marginal(self):
        return self.mu_psi

    @property
    def has_density(self):
        return self.mu_p.has_density and self.mu_psi.has_density

    def positive_psi_mass(self):
        return float(self.mu_psi.sf(0.0))

    def sample(self, rng, n):
        return sample(self.mu_p, rng, n), sample(self.mu_psi, rng, n)

    def with_r(self, r):
        return replace(self, r=r)


@dataclass(frozen=True)
class PlanarAtoms:
    """Weighted atoms ``((p, psi), weight)`` in the plane."""

    points: tuple  # ((p, psi, weight), ...)
    r: float

    def __post_init__(self):
        _check_r(self.r)
        pts = tuple((float(p), float(s), float(w)) for p, s, w in self.points)
        if not pts:
            raise DomainError("PlanarAtoms needs at least one atom")
        arr = np.array(pts)
        if np.any((arr[:, 0] < 0) | (arr[:, 0] > 1)):
            raise DomainError("atom p-coordinates must lie in [0, 1]")
        if np.any(arr[:, 1] < 0):
            raise DomainError("atom psi-coordinates must be nonnegative")
        if np.any(arr[:, 2] < 0) or abs(arr[:, 2].sum() - 1.0) > 1e-12:
            raise DomainError("atom weights must be nonnegative and sum to 1")
        object.__setattr__(self, "points", pts)

    has_density = False

    @property
    def p(self):
        return np.array([a[0] for a in self.points])

    @property
    def psi(self):
        return np.array([a[1] for a in self.points])

    @property
    def weights(self):
        return np.array([a[2] for a in self.points])

    @property
    def psi_marginal(self):
        merged = {}
        for _, s, w in self.points:
            merged[s] = merged.get(s, 0.0) + w
        return AtomMixture(tuple(merged.items()))

    def positive_psi_mass(self):
        return float(self.weights[self.psi > 0].sum())

    def sample(self, rng, n):
        k = rng.choice(len(self.points), size=n, p=self.weights)
        return self.p[k], self.psi[k]

    def with_r(self, r):
        return replace(self, r=r)


@dataclass(frozen=True)
class Box:
    p_lo: float
    p_hi: float
    psi_lo: float
    psi_hi: float
    weight: float


@dataclass(frozen=True)
class BoxMixture:
    """Mixture of uniform densities on axis-aligned rectangles (smoothed atoms)."""

    boxes: tuple
    r: float
    radius: float = field(default=0.0)

    def __post_init__(self):
        _check_r(self.r)
        w = np.array([b.weight for b in self.boxes])
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise DomainError("box weights must be nonnegative and sum to 1")

    has_density = True

    def arrays(self):
        """Columns ``(p_lo, p_hi, psi_lo, psi_hi, weight)`` as float arrays."""
        return tuple(np.array([getattr(b, f) for b in self.boxes]) for f in ("p_lo", "p_hi", "psi_lo", "psi_hi", "weight"))

    @property
    def psi_marginal(self):
        return UniformMixture(tuple((b.psi_lo, b.psi_hi, b.weight) for b in self.boxes))

    def positive_psi_mass(self):
        return float(self.psi_marginal.sf(0.0))

    def sample(self, rng, n):
        p0, p1, s0, s1, w = self.arrays()
        k = rng.choice(len(self.boxes), size=n, p=w / w.sum())
        return p0[k] + rng.random(n) * (p1[k] - p0[k]), s0[k] + rng.random(n) * (s1[k] - s0[k])

    def with_r(self, r):
        return replace(self, r=r)


PopulationMeasure = Union[ProductMeasure, PlanarAtoms, BoxMixture]


def smooth_atoms(pm: PlanarAtoms, radius: float) -> BoxMixture:
    """Replace every atom by a uniform square of half-side ``radius``.

    Squares are clipped to [0, 1] x [0, inf); weights are preserved.
    """
    if not isinstance(pm, PlanarAtoms):
        raise DomainError("smooth_atoms expects a PlanarAtoms population")
    if not radius > 0:
        raise DomainError(f"smoothing radius must be positive, got {radius}")
    if radius >= 0.5:
        raise DomainError("smoothing radius must be below 0.5 so squares fit the p-range")
    boxes = tuple(
        Box(max(0.0, p - radius), min(1.0, p + radius), max(0.0, s - radius), s + radius, w)
        for p, s, w in pm.points
    )
    return BoxMixture(boxes, pm.r, radius)


def planar_atoms(points: Sequence, r: float, merge_tol: float = 1e-12) -> PlanarAtoms:
    """Build PlanarAtoms, merging atoms whose locations agree within ``merge_tol``."""
    merged: list[list[float]] = []
    for p, s, w in points:
        for m in merged:
            if abs(m[0] - p) <= merge_tol and abs(m[1] - s) <= merge_tol:
                m[2] += w
                break
        else:
            merged.append([float(p), float(s), float(w)])
    total = sum(m[2] for m in merged)
    return PlanarAtoms(tuple((p, s, w / total) for p, s, w in merged), r)


def psi_scale(pm) -> float:
    """Typical psi magnitude (median of the positive part), used for search bounds."""
    m = pm.psi_marginal
    s = float(m.quantile(0.5))
    if s <= 0:
        s = float(m.quantile(1 - 0.5 * m.sf(0.0))) if m.sf(0.0) > 0 else 1.0
    return s if s > 0 else 1.0
